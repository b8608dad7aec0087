use serde::{Deserialize, Serialize};

use super::cost::{cost_j, Reference};
use super::equalize::{equalize_knots, knots_to_density, EqualizeOptions, IdentificationResult, KnotSpace};
use crate::density::{MaxoutDensity, StretchDomain};
use crate::error::{invalid, Error, Result};
use crate::models::DensityModel;
use crate::numeric::{serde_extended_f64, uniform_grid};
use crate::specimen::{BoundaryProgram, Specimen};

/// Relative slack when checking `J(u*) ≤ J(f_N) ≤ bound`.
pub const CHAIN_TOLERANCE: f64 = 1e-9;

fn require_covered(w: &DensityModel, k: &StretchDomain) -> Result<()> {
    if !w.is_convex() {
        return Err(Error::ConvexityViolation(format!("{} is not flagged convex", w.name())));
    }
    if !w.covers(k) {
        let (lo, hi) = w.validity();
        return Err(Error::DomainViolation {
            point: format!("stretch domain {k}"),
            domain: format!("{} validity [{lo}, {hi}]", w.name()),
        });
    }
    Ok(())
}

/// The one-bar optimal chord majorant of `w` on K, used as a feasible trial
/// density for a parallel-bar specimen. Since it majorizes `w` on K, its
/// energy dominates the measured energy at every admissible δ.
pub fn minimizing_sequence_parallel(
    w: &DensityModel,
    specimen: &Specimen,
    k: &StretchDomain,
    n: usize,
) -> Result<(MaxoutDensity, IdentificationResult)> {
    if !specimen.is_bar() {
        return Err(invalid("the chord majorant construction needs a bar specimen"));
    }
    require_covered(w, k)?;
    let mut result = equalize_knots(w, k.xi_min(), k.xi_max(), n, &EqualizeOptions::default())?;
    result.knot_space = KnotSpace::Stretch;
    Ok((result.density.clone(), result))
}

/// Chords of `w` on the uniform partition of K into `n` intervals.
pub fn uniform_interpolant(w: &DensityModel, k: &StretchDomain, n: usize) -> Result<MaxoutDensity> {
    if n == 0 {
        return Err(invalid("piece count N must be at least 1"));
    }
    require_covered(w, k)?;
    knots_to_density(w, &uniform_grid(k.xi_min(), k.xi_max(), n + 1))
}

/// One row of a convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    #[serde(rename = "N")]
    pub n: usize,
    /// `J(u_N*)`.
    #[serde(with = "serde_extended_f64")]
    pub cost_optimal: f64,
    /// `J(f_N)` for the uniform interpolant.
    #[serde(with = "serde_extended_f64")]
    pub cost_interpolant: f64,
    /// `(Σ A_k L_k)·Lip(w)·|K|/N`.
    #[serde(with = "serde_extended_f64")]
    pub bound_lipschitz: f64,
    /// `(Σ A_k L_k)·‖w‖_{C²}·|K|²/N²`, +∞ when no second-derivative bound
    /// is known.
    #[serde(with = "serde_extended_f64")]
    pub bound_c2: f64,
}

impl ConvergenceRecord {
    pub fn bound(&self) -> f64 {
        self.bound_lipschitz.min(self.bound_c2)
    }

    /// The first failing link of `J(u*) ≤ J(f_N) ≤ bound`, if any.
    pub fn chain_violation(&self) -> Option<&'static str> {
        let slack = |x: f64| CHAIN_TOLERANCE * x.abs() + 1e-15;
        if !(self.cost_optimal <= self.cost_interpolant + slack(self.cost_interpolant)) {
            Some("J(u_N*) <= J(f_N)")
        } else if !(self.cost_interpolant <= self.bound() + slack(self.bound())) {
            Some("J(f_N) <= bound")
        } else {
            None
        }
    }
}

/// Costs and bounds for each N over the admissible program of K, without
/// checking the chain.
pub fn convergence_records(
    specimen: &Specimen,
    w: &DensityModel,
    k: &StretchDomain,
    n_list: &[usize],
) -> Result<Vec<ConvergenceRecord>> {
    let program = specimen.admissible_program(k)?;
    let e0 = specimen.energy_profile(w)?;
    convergence_records_on(specimen, w, &program, Reference::Continuum(&e0), n_list)
}

/// Costs and bounds for each N over an explicit program. The trial densities
/// are built on the stretches the program covers.
pub fn convergence_records_on(
    specimen: &Specimen,
    w: &DensityModel,
    program: &BoundaryProgram,
    reference: Reference<'_>,
    n_list: &[usize],
) -> Result<Vec<ConvergenceRecord>> {
    if n_list.is_empty() {
        return Err(invalid("N list is empty"));
    }
    let k = specimen.covered_stretches(program)?;
    let volume = specimen.total_volume();
    let width = k.width();
    let lip = w.lipschitz_bound_on(&k);
    let c2 = w.c2_norm_on(&k).unwrap_or(f64::INFINITY);
    n_list
        .iter()
        .map(|&n| {
            let (u_star, _) = minimizing_sequence_parallel(w, specimen, &k, n)?;
            let f_n = uniform_interpolant(w, &k, n)?;
            let nf = n as f64;
            Ok(ConvergenceRecord {
                n,
                cost_optimal: cost_j(specimen, &u_star, reference, program)?.cost,
                cost_interpolant: cost_j(specimen, &f_n, reference, program)?.cost,
                bound_lipschitz: volume * lip * width / nf,
                bound_c2: volume * c2 * width * width / (nf * nf),
            })
        })
        .collect()
}

/// Fails with an invariant violation at the first record that breaks
/// `J(u_N*) ≤ J(f_N) ≤ bound`.
pub fn check_chain(records: &[ConvergenceRecord]) -> Result<()> {
    for r in records {
        if let Some(link) = r.chain_violation() {
            return Err(Error::InvariantViolation(format!(
                "N = {}: {link} fails (J(u*) = {}, J(f_N) = {}, bound = {})",
                r.n,
                r.cost_optimal,
                r.cost_interpolant,
                r.bound()
            )));
        }
    }
    Ok(())
}

/// Convergence table over `n_list`; fails with an invariant violation when
/// some record breaks `J(u_N*) ≤ J(f_N) ≤ bound`.
pub fn convergence_study(
    specimen: &Specimen,
    w: &DensityModel,
    k: &StretchDomain,
    n_list: &[usize],
) -> Result<Vec<ConvergenceRecord>> {
    let records = convergence_records(specimen, w, k, n_list)?;
    check_chain(&records)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{quadratic_density, reduced_neo_hookean};
    use crate::specimen::BarMember;

    fn bar(a: f64, l: f64) -> BarMember {
        BarMember::new(a, l).unwrap()
    }

    #[test]
    fn quadratic_one_bar_costs() {
        let s = Specimen::one_bar(bar(1.0, 1.0));
        let w = quadratic_density(1.0).unwrap();
        let k = StretchDomain::new(1.0, 2.0).unwrap();
        let recs = convergence_study(&s, &w, &k, &[2, 3, 4, 5]).unwrap();
        for r in &recs {
            let want = 1.0 / (8.0 * (r.n * r.n) as f64);
            assert!((r.cost_optimal - want).abs() < 1e-12, "{r:?}");
            assert!(r.cost_optimal <= r.cost_interpolant * (1.0 + CHAIN_TOLERANCE), "{r:?}");
            assert!(r.cost_interpolant <= r.bound_lipschitz);
        }
        assert_eq!(convergence_study(&s, &w, &k, &[3]).unwrap().len(), 1);
    }

    #[test]
    fn interpolant_error_examples() {
        let sq = crate::models::custom_density(
            crate::models::CustomDensity::new("square", |x: f64| x * x, 2.0, true).with_derivative(|x| 2.0 * x),
        )
        .unwrap();
        let k = StretchDomain::interval(0.0, 1.0).unwrap();
        let f = uniform_interpolant(&sq, &k, 2).unwrap();
        let dev = uniform_grid(0.0, 1.0, 100_001)
            .into_iter()
            .map(|x| f.value_stretch(x).unwrap() - x * x)
            .fold(0.0_f64, f64::max);
        assert!((dev - 1.0 / 16.0).abs() < 1e-12);
        assert!((f.value_stretch(0.25).unwrap() - 0.0625 - 1.0 / 16.0).abs() < 1e-15);

        let w = reduced_neo_hookean(1.0).unwrap();
        let k = StretchDomain::new(0.5, 2.0).unwrap();
        let (lip, c2) = (w.lipschitz_bound_on(&k), w.c2_norm_on(&k).unwrap());
        let mut n = 2;
        while n <= 32 {
            let f = uniform_interpolant(&w, &k, n).unwrap();
            let dev = uniform_grid(0.5, 2.0, 100_001)
                .into_iter()
                .map(|x| (f.value_stretch(x).unwrap() - w.value(x)).abs())
                .fold(0.0_f64, f64::max);
            let nf = n as f64;
            assert!(dev <= lip * 1.5 / nf);
            assert!(dev <= c2 * 2.25 / (nf * nf));
            n *= 2;
        }
    }

    #[test]
    fn two_bar_chain_and_monotone_improvement() {
        let s = Specimen::parallel_bars(vec![bar(1.0, 1.0), bar(1.0, 2.0)]).unwrap();
        let w = reduced_neo_hookean(1.0).unwrap();
        let k = StretchDomain::new(0.5, 2.0).unwrap();
        let recs = convergence_records(&s, &w, &k, &[1, 2, 3, 4, 6, 8]).unwrap();
        for pair in recs.windows(2) {
            assert!(pair[1].cost_optimal <= pair[0].cost_optimal * (1.0 + 1e-9));
        }
        for r in &recs {
            assert!(r.cost_optimal.is_finite() && r.cost_interpolant.is_finite());
            assert!(r.cost_interpolant <= r.bound() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn rejects_uncovered_domains() {
        let w = reduced_neo_hookean(1.0).unwrap();
        let k = StretchDomain::interval(-1.0, 2.0).unwrap();
        assert!(uniform_interpolant(&w, &k, 2).is_err());
        let k = StretchDomain::new(0.5, 2.0).unwrap();
        assert!(uniform_interpolant(&w, &k, 0).is_err());
    }
}
