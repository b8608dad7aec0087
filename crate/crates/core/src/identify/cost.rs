use serde::{Deserialize, Serialize};

use crate::density::maxout::{active_index, envelope_breakpoints};
use crate::density::{AffinePiece1D, MaxoutDensity};
use crate::error::{invalid, Error, Result};
use crate::numeric::{bisect_decreasing, golden_section_max, serde_extended_f64};
use crate::profile::ConvexProfile;
use crate::specimen::{aggregate, BarMember, BoundaryProgram, EnergyMeasurement, Specimen};

use super::chord::finite_value;

/// Relative slack on the majorization constraint `E(u; δ) ≥ E₀(δ)`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// What the trial energy is compared against.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    /// A convex callable E₀ over the whole program interval.
    Continuum(&'a dyn ConvexProfile),
    /// Finitely many measurements; only samples inside the program count.
    Grid(&'a [EnergyMeasurement]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEvaluation {
    /// `sup (E − E₀)` over the program, or +∞ when the constraint fails.
    #[serde(with = "serde_extended_f64")]
    pub cost: f64,
    pub feasible: bool,
    /// Boundary parameter attaining the cost (smallest one on ties).
    pub argmax: f64,
    /// Smallest observed `E − E₀` and where it occurred.
    pub min_gap: f64,
    pub argmin: f64,
}

struct Tracker {
    max: (f64, f64),
    min: (f64, f64),
    feasible: bool,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            max: (f64::NAN, f64::NEG_INFINITY),
            min: (f64::NAN, f64::INFINITY),
            feasible: true,
        }
    }

    fn candidate(&mut self, delta: f64, gap: f64) {
        if gap > self.max.1 || (gap == self.max.1 && delta < self.max.0) {
            self.max = (delta, gap);
        }
    }

    fn endpoint(&mut self, delta: f64, gap: f64, e0: f64) {
        self.candidate(delta, gap);
        if gap < self.min.1 || (gap == self.min.1 && delta < self.min.0) {
            self.min = (delta, gap);
        }
        if gap < -FEASIBILITY_TOLERANCE * (1.0 + e0.abs()) {
            self.feasible = false;
        }
    }

    fn finish(self) -> CostEvaluation {
        CostEvaluation {
            cost: if self.feasible { self.max.1.max(0.0) } else { f64::INFINITY },
            feasible: self.feasible,
            argmax: self.max.0,
            min_gap: self.min.1,
            argmin: self.min.0,
        }
    }
}

fn bar_pieces<'a>(specimen: &'a Specimen, u: &'a MaxoutDensity) -> Result<(&'a [BarMember], &'a [AffinePiece1D])> {
    if !specimen.is_bar() {
        return Err(invalid("cost evaluation requires a bar specimen"));
    }
    let pieces = u.stretch_pieces().ok_or_else(|| Error::DimensionMismatch {
        expected: "stretch density".into(),
        found: format!("{:?}", u.kind()),
    })?;
    Ok((specimen.members(), pieces))
}

/// Boundary parameters in `[lo, hi]` where `δ ↦ E(u; δ)` can change slope:
/// the breakpoints of u pulled back through every member's stretch map, plus
/// the program endpoints.
fn energy_breakpoints(members: &[BarMember], pieces: &[AffinePiece1D], lo: f64, hi: f64) -> Vec<f64> {
    let mut cuts = vec![lo, hi];
    for m in members {
        let (a, b) = (m.stretch(lo), m.stretch(hi));
        for xi in envelope_breakpoints(pieces, a, b) {
            let delta = (xi - 1.0) * m.length;
            if delta > lo && delta < hi {
                cuts.push(delta);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// Cost `J(u) = sup_M (E(u; ·) − E₀)` subject to `E(u; ·) ≥ E₀` on M.
///
/// In continuum mode M is split at the kinks of the trial energy. On each
/// piece the trial energy is affine and the gap concave, so the constraint is
/// checked at the piece ends and the maximum is found by a one-dimensional
/// concave search.
pub fn cost_j(
    specimen: &Specimen,
    u: &MaxoutDensity,
    reference: Reference<'_>,
    program: &BoundaryProgram,
) -> Result<CostEvaluation> {
    let (members, pieces) = bar_pieces(specimen, u)?;
    let mut t = Tracker::new();
    match reference {
        Reference::Grid(samples) => {
            let mut any = false;
            for s in samples.iter().filter(|s| program.contains(s.delta)) {
                if !s.energy.is_finite() {
                    return Err(Error::NonFinite(format!("measured energy at {}", s.delta)));
                }
                any = true;
                t.endpoint(s.delta, aggregate(members, pieces, s.delta) - s.energy, s.energy);
            }
            if !any {
                return Err(invalid("no measurement lies inside the boundary program"));
            }
        }
        Reference::Continuum(e0) => {
            let cuts = energy_breakpoints(members, pieces, program.delta_min, program.delta_max);
            for &d in &cuts {
                let e0d = finite_value(e0, d)?;
                t.endpoint(d, aggregate(members, pieces, d) - e0d, e0d);
            }
            for seg in cuts.windows(2) {
                segment_max(members, pieces, e0, seg[0], seg[1], &mut t)?;
            }
        }
    }
    Ok(t.finish())
}

fn segment_max(
    members: &[BarMember],
    pieces: &[AffinePiece1D],
    e0: &dyn ConvexProfile,
    a: f64,
    b: f64,
    t: &mut Tracker,
) -> Result<()> {
    let mid = 0.5 * (a + b);
    // slope of the trial energy on the segment, from the pieces active there
    let slope: f64 = members
        .iter()
        .map(|m| m.area * pieces[active_index(pieces, m.stretch(mid))].slope)
        .sum();
    let tol_x = 1e-13 * (b - a).max(1e-3 * a.abs().max(b.abs()));
    let x = match e0.slope(mid) {
        Some(d) if d.is_finite() => bisect_decreasing(|x| slope - e0.slope(x).unwrap_or(f64::NAN), a, b, tol_x),
        _ => golden_section_max(|x| aggregate(members, pieces, x) - e0.value(x), a, b, tol_x),
    };
    if x > a && x < b {
        let gap = aggregate(members, pieces, x) - finite_value(e0, x)?;
        t.candidate(x, gap);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::StretchDomain;
    use crate::identify::knots_to_density;
    use crate::models::{quadratic_density, reduced_neo_hookean};
    use crate::numeric::uniform_grid;

    fn bar(a: f64, l: f64) -> BarMember {
        BarMember::new(a, l).unwrap()
    }

    fn two_bars() -> Specimen {
        Specimen::parallel_bars(vec![bar(1.0, 1.0), bar(1.0, 2.0)]).unwrap()
    }

    fn nh_setup() -> (Specimen, crate::models::DensityModel, BoundaryProgram) {
        let s = two_bars();
        let w = reduced_neo_hookean(1.0).unwrap();
        let program = s.admissible_program(&StretchDomain::new(0.5, 2.0).unwrap()).unwrap();
        (s, w, program)
    }

    #[test]
    fn dense_chord_rendering_has_zero_cost() {
        let (s, w, program) = nh_setup();
        let u = knots_to_density(&w, &uniform_grid(0.5, 2.0, 1001)).unwrap();
        let e0 = s.energy_profile(&w).unwrap();
        let c = cost_j(&s, &u, Reference::Continuum(&e0), &program).unwrap();
        assert!(c.feasible);
        assert!(c.cost >= 0.0 && c.cost < 1e-5);
    }

    #[test]
    fn constant_shift_costs_shift_times_volume() {
        let (s, w, program) = nh_setup();
        let e0 = s.energy_profile(&w).unwrap();
        let base = knots_to_density(&w, &uniform_grid(0.5, 2.0, 4001)).unwrap();
        let c0 = cost_j(&s, &base, Reference::Continuum(&e0), &program).unwrap().cost;
        let c = cost_j(&s, &base.shifted(0.25), Reference::Continuum(&e0), &program).unwrap().cost;
        let want = 0.25 * s.total_volume();
        assert!((c - want).abs() <= c0 + 1e-12, "{c} vs {want}");
    }

    #[test]
    fn dip_below_density_is_infeasible() {
        let s = Specimen::one_bar(bar(1.0, 1.0));
        let w = quadratic_density(1.0).unwrap();
        let program = BoundaryProgram::new(0.0, 1.0, 11).unwrap();
        let e0 = s.energy_profile(&w).unwrap();
        // single chord from ξ = 1 to 2, then dipped by a steep piece-free shift
        let u = knots_to_density(&w, &[1.0, 1.5, 2.0]).unwrap().shifted(-1e-3);
        let c = cost_j(&s, &u, Reference::Continuum(&e0), &program).unwrap();
        assert!(!c.feasible);
        assert_eq!(c.cost, f64::INFINITY);
        assert!(c.min_gap < 0.0);
    }

    #[test]
    fn matches_dense_grid_maximization() {
        let (s, w, program) = nh_setup();
        let e0 = s.energy_profile(&w).unwrap();
        let u = knots_to_density(&w, &[0.5, 0.8, 1.1, 1.5, 2.0]).unwrap();
        let c = cost_j(&s, &u, Reference::Continuum(&e0), &program).unwrap();
        let oracle = uniform_grid(program.delta_min, program.delta_max, 1_000_001)
            .into_iter()
            .map(|d| s.aggregate_energy(&u, d).unwrap() - s.measure_energy(&w, d).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(c.cost >= oracle - 1e-12);
        assert!(c.cost - oracle < 1e-8, "{} vs {oracle}", c.cost);
    }

    #[test]
    fn grid_mode_uses_samples_in_the_program() {
        let (s, w, program) = nh_setup();
        let u = knots_to_density(&w, &[0.5, 1.25, 2.0]).unwrap();
        let data = s.generate_dataset(&w, &program.with_samples(2001).unwrap()).unwrap();
        let grid = cost_j(&s, &u, Reference::Grid(&data), &program).unwrap();
        let e0 = s.energy_profile(&w).unwrap();
        let cont = cost_j(&s, &u, Reference::Continuum(&e0), &program).unwrap();
        assert!(grid.cost <= cont.cost + 1e-12);
        assert!(cont.cost - grid.cost < 1e-4);
        let narrow = BoundaryProgram::new(2.0, 3.0, 2).unwrap();
        assert!(cost_j(&s, &u, Reference::Grid(&data), &narrow).is_err());
    }

    #[test]
    fn cell_specimens_are_rejected() {
        let cell = Specimen::affine_cell(1.0, 2).unwrap();
        let u = knots_to_density(&quadratic_density(1.0).unwrap(), &[0.0, 1.0]).unwrap();
        let data = [EnergyMeasurement { delta: 0.0, energy: 0.0 }];
        let program = BoundaryProgram::new(0.0, 1.0, 2).unwrap();
        assert!(cost_j(&cell, &u, Reference::Grid(&data), &program).is_err());
    }
}
