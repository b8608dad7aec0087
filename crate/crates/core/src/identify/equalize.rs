use serde::{Deserialize, Serialize};

use super::chord::{chord_error, finite_value};
use crate::density::{AffinePiece1D, MaxoutDensity};
use crate::error::{invalid, Error, Result};
use crate::models::DensityModel;
use crate::numeric::serde_extended_f64;
use crate::profile::ConvexProfile;

/// Tolerances of the nested bisection in [`equalize_knots`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqualizeOptions {
    /// Relative width at which the outer bisection on the error level stops.
    pub tol_z: f64,
    /// Knot tolerance as a fraction of the interval length.
    pub tol_x_rel: f64,
    /// Iteration cap of the outer bisection.
    pub max_iters: usize,
}

impl Default for EqualizeOptions {
    fn default() -> Self {
        EqualizeOptions {
            tol_z: 1e-10,
            tol_x_rel: 1e-12,
            max_iters: 200,
        }
    }
}

/// The variable the knots of an [`IdentificationResult`] live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotSpace {
    /// Boundary displacement δ.
    Displacement,
    /// Member stretch ξ.
    Stretch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    /// Max-of-chords density, one piece per interval.
    pub density: MaxoutDensity,
    pub knots: Vec<f64>,
    pub knot_space: KnotSpace,
    #[serde(with = "serde_extended_f64")]
    pub cost: f64,
    #[serde(with = "serde_extended_f64::vec")]
    pub interval_errors: Vec<f64>,
    #[serde(with = "serde_extended_f64::vec")]
    pub multipliers: Vec<f64>,
}

/// Chords of `profile` on consecutive knots, as a maxout density.
pub(crate) fn chord_density<P: ConvexProfile + ?Sized>(profile: &P, knots: &[f64]) -> Result<MaxoutDensity> {
    if knots.len() < 2 {
        return Err(invalid("at least two knots are required"));
    }
    if knots.windows(2).any(|k| !(k[0] < k[1])) || knots.iter().any(|k| !k.is_finite()) {
        return Err(invalid("knots must be finite and strictly increasing"));
    }
    let values = knots
        .iter()
        .map(|&k| finite_value(profile, k))
        .collect::<Result<Vec<_>>>()?;
    let pieces: Vec<AffinePiece1D> = knots
        .windows(2)
        .zip(values.windows(2))
        .map(|(k, v)| {
            let slope = (v[1] - v[0]) / (k[1] - k[0]);
            AffinePiece1D::new(v[0] - slope * k[0], slope)
        })
        .collect();
    let ell = pieces.iter().map(|p| p.slope.abs()).fold(f64::EPSILON, f64::max);
    MaxoutDensity::stretch(pieces, ell)
}

/// Maxout of the chords of `w` between consecutive stretch knots. The result
/// majorizes `w` on the knot hull and interpolates it at the knots.
pub fn knots_to_density(w: &DensityModel, stretch_knots: &[f64]) -> Result<MaxoutDensity> {
    for &k in stretch_knots {
        w.evaluate(k)?;
    }
    chord_density(w, stretch_knots)
}

struct Marcher<'a, P: ?Sized> {
    e0: &'a P,
    lo: f64,
    hi: f64,
    n: usize,
    tol_x: f64,
}

impl<P: ConvexProfile + ?Sized> Marcher<'_, P> {
    fn excess(&self, a: f64, b: f64) -> Result<f64> {
        Ok(chord_error(self.e0, a, b)?.excess)
    }

    /// Greedy partition with every interval excess at most `z`; `None` when
    /// more than `n` intervals would be needed.
    fn march(&self, z: f64) -> Result<Option<Vec<f64>>> {
        let mut knots = vec![self.lo];
        let mut x = self.lo;
        loop {
            if knots.len() > self.n {
                return Ok(None);
            }
            if self.excess(x, self.hi)? <= z {
                knots.push(self.hi);
                return Ok(Some(knots));
            }
            let (mut a, mut b) = (x, self.hi);
            let mut iters = 0;
            while b - a > self.tol_x && iters < crate::numeric::MAX_BISECTION_ITERS {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if self.excess(x, mid)? <= z {
                    a = mid;
                } else {
                    b = mid;
                }
                iters += 1;
            }
            if a <= x {
                return Ok(None);
            }
            knots.push(a);
            x = a;
        }
    }
}

/// Splits the widest intervals in half until there are `n` of them.
fn refine_to(mut knots: Vec<f64>, n: usize) -> Vec<f64> {
    while knots.len() < n + 1 {
        let (i, _) = knots
            .windows(2)
            .enumerate()
            .map(|(i, k)| (i, k[1] - k[0]))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let mid = 0.5 * (knots[i] + knots[i + 1]);
        knots.insert(i + 1, mid);
    }
    knots
}

fn finish<P: ConvexProfile + ?Sized>(e0: &P, knots: Vec<f64>, n: usize) -> Result<IdentificationResult> {
    let knots = refine_to(knots, n);
    let interval_errors = knots
        .windows(2)
        .map(|k| chord_error(e0, k[0], k[1]).map(|c| c.excess))
        .collect::<Result<Vec<_>>>()?;
    let cost = interval_errors.iter().copied().fold(0.0, f64::max);
    let total: f64 = interval_errors.iter().sum();
    let multipliers = if total > 0.0 {
        interval_errors.iter().map(|e| e / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    Ok(IdentificationResult {
        density: chord_density(e0, &knots)?,
        knots,
        knot_space: KnotSpace::Displacement,
        cost,
        interval_errors,
        multipliers,
    })
}

/// Places `n − 1` interior knots on `[lo, hi]` so that every chord interval
/// of `e0` has the same excess, which is the minimax optimum over max-of-chord
/// majorants with `n` pieces.
///
/// Outer bisection runs on the common error level z; for a given z a greedy
/// march places each knot as far right as the excess allows. A level is
/// feasible when the march reaches `hi` within `n` intervals.
pub fn equalize_knots<P: ConvexProfile + ?Sized>(
    e0: &P,
    lo: f64,
    hi: f64,
    n: usize,
    opts: &EqualizeOptions,
) -> Result<IdentificationResult> {
    if n == 0 {
        return Err(invalid("piece count N must be at least 1"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("domain requires lo < hi, got [{lo}, {hi}]")));
    }
    let marcher = Marcher {
        e0,
        lo,
        hi,
        n,
        tol_x: opts.tol_x_rel * (hi - lo),
    };
    let mut z_hi = marcher.excess(lo, hi)?;
    let mut best = vec![lo, hi];
    if n == 1 || z_hi == 0.0 {
        return finish(e0, best, n);
    }
    let mut z_lo = 0.0;
    let mut converged = false;
    for _ in 0..opts.max_iters {
        if z_hi - z_lo <= opts.tol_z * 1e-4 * z_hi {
            converged = true;
            break;
        }
        let z = 0.5 * (z_lo + z_hi);
        match marcher.march(z)? {
            Some(knots) => {
                z_hi = z;
                best = knots;
            }
            None => z_lo = z,
        }
    }
    if !converged && z_hi - z_lo > opts.tol_z * z_hi {
        let partial = finish(e0, best, n)?;
        return Err(Error::NumericalFailure {
            message: format!(
                "error level bracket [{z_lo}, {z_hi}] did not close within {} iterations",
                opts.max_iters
            ),
            best: Some(Box::new(partial)),
        });
    }
    finish(e0, best, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{quadratic_density, reduced_neo_hookean};
    use crate::numeric::uniform_grid;
    use crate::profile::FnProfileWithSlope;

    fn quadratic() -> impl ConvexProfile {
        FnProfileWithSlope { value: |x: f64| 0.5 * x * x, slope: |x: f64| x }
    }

    #[test]
    fn quadratic_bar_has_uniform_knots() {
        let r = equalize_knots(&quadratic(), 0.0, 1.0, 4, &EqualizeOptions::default()).unwrap();
        for (k, want) in r.knots.iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert!((k - want).abs() < 1e-8, "{:?}", r.knots);
        }
        assert!((r.cost - 1.0 / 128.0).abs() < 1e-10);
        for m in &r.multipliers {
            assert!((m - 0.25).abs() < 1e-8);
        }
        assert_eq!(r.density.len(), 4);
    }

    #[test]
    fn single_piece_is_the_endpoint_chord() {
        let w = reduced_neo_hookean(1.0).unwrap();
        let r = equalize_knots(&w, 0.5, 2.0, 1, &EqualizeOptions::default()).unwrap();
        assert_eq!(r.knots, vec![0.5, 2.0]);
        assert_eq!(r.cost, chord_error(&w, 0.5, 2.0).unwrap().excess);
        assert_eq!(r.multipliers, vec![1.0]);
    }

    #[test]
    fn errors_are_equalized() {
        let w = reduced_neo_hookean(1.0).unwrap();
        for n in 2..=8 {
            let r = equalize_knots(&w, 0.5, 2.0, n, &EqualizeOptions::default()).unwrap();
            let max = r.interval_errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = r.interval_errors.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(max - min <= 1e-10 * (1.0 + r.cost), "N={n}: {:?}", r.interval_errors);
            assert_eq!(r.cost, max);
            assert!((r.multipliers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!((r.knots[0], r.knots[n]), (0.5, 2.0));
            assert!(r.knots.windows(2).all(|k| k[0] < k[1]));
        }
    }

    fn grid_cost(w: &DensityModel, knots: &[f64]) -> f64 {
        knots
            .windows(2)
            .map(|k| chord_error(w, k[0], k[1]).unwrap().excess)
            .fold(0.0, f64::max)
    }

    /// Exhaustive search over interior knots drawn from candidate lists, one
    /// list per interior knot (at most two).
    fn exhaustive(w: &DensityModel, lo: f64, hi: f64, cands: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let mut best = (vec![lo, hi], f64::INFINITY);
        match cands {
            [first] => {
                for &a in first.iter().filter(|&&a| a > lo && a < hi) {
                    let c = grid_cost(w, &[lo, a, hi]);
                    if c < best.1 {
                        best = (vec![lo, a, hi], c);
                    }
                }
            }
            [first, second] => {
                let tail: Vec<f64> = second.iter().map(|&b| if b < hi { grid_cost(w, &[b, hi]) } else { f64::INFINITY }).collect();
                for &a in first.iter().filter(|&&a| a > lo && a < hi) {
                    let head = grid_cost(w, &[lo, a]);
                    if head >= best.1 {
                        continue;
                    }
                    for (j, &b) in second.iter().enumerate() {
                        if b <= a || tail[j] >= best.1 {
                            continue;
                        }
                        let mid = grid_cost(w, &[a, b]);
                        if mid >= best.1 {
                            break;
                        }
                        let c = head.max(mid).max(tail[j]);
                        if c < best.1 {
                            best = (vec![lo, a, b, hi], c);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        best
    }

    /// Grid search at 1e-3 resolution, followed by a 1e-5 grid in a 2e-3
    /// window around the coarse winner so the cost is resolved finely enough
    /// for a 1e-5 comparison.
    fn brute_force(w: &DensityModel, lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
        let cells = ((hi - lo) / 1e-3).round() as usize;
        let grid = uniform_grid(lo, hi, cells + 1);
        let coarse = exhaustive(w, lo, hi, &vec![grid; n - 1]);
        let fine: Vec<Vec<f64>> = coarse.0[1..n]
            .iter()
            .map(|&k| uniform_grid(k - 2e-3, k + 2e-3, 401))
            .collect();
        let refined = exhaustive(w, lo, hi, &fine);
        for (a, b) in coarse.0.iter().zip(&refined.0) {
            assert!((a - b).abs() <= 2e-3);
        }
        refined
    }

    #[test]
    fn matches_brute_force_knot_search() {
        let w = reduced_neo_hookean(1.0).unwrap();
        for n in [2, 3] {
            let r = equalize_knots(&w, 0.5, 2.0, n, &EqualizeOptions::default()).unwrap();
            let (knots, cost) = brute_force(&w, 0.5, 2.0, n);
            for (a, b) in r.knots.iter().zip(&knots) {
                assert!((a - b).abs() <= 2e-3, "N={n}: {:?} vs {knots:?}", r.knots);
            }
            assert!(r.cost <= cost + 1e-12 && cost - r.cost <= 1e-5, "N={n}: {} vs {cost}", r.cost);
        }
        // denser near the stiff end ξ = 0.5
        let r = equalize_knots(&w, 0.5, 2.0, 3, &EqualizeOptions::default()).unwrap();
        assert!(r.knots[1] - r.knots[0] < r.knots[3] - r.knots[2]);
    }

    #[test]
    fn affine_stretch_absorbs_the_remainder() {
        // affine on [0, 1], curved beyond
        let e0 = FnProfileWithSlope {
            value: |x: f64| if x < 1.0 { x } else { x + (x - 1.0).powi(2) },
            slope: |x: f64| if x < 1.0 { 1.0 } else { 1.0 + 2.0 * (x - 1.0) },
        };
        let r = equalize_knots(&e0, 0.0, 2.0, 3, &EqualizeOptions::default()).unwrap();
        assert_eq!(r.knots.len(), 4);
        assert!(r.knots.windows(2).all(|k| k[0] < k[1]));
        let affine = FnProfileWithSlope { value: |x: f64| 2.0 * x, slope: |_| 2.0 };
        let r = equalize_knots(&affine, 0.0, 1.0, 4, &EqualizeOptions::default()).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.multipliers, vec![0.25; 4]);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let opts = EqualizeOptions { max_iters: 3, ..Default::default() };
        let w = reduced_neo_hookean(1.0).unwrap();
        match equalize_knots(&w, 0.5, 2.0, 4, &opts) {
            Err(Error::NumericalFailure { best: Some(b), .. }) => assert_eq!(b.knots.len(), 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            equalize_knots(&w, 0.5, 2.0, 0, &EqualizeOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn chord_rendering_examples() {
        let q = quadratic_density(1.0).unwrap();
        let u = knots_to_density(&q, &[0.0, 1.0, 2.0]).unwrap();
        let slopes: Vec<f64> = u.stretch_pieces().unwrap().iter().map(|p| p.slope).collect();
        assert_eq!(slopes, vec![-0.5, 0.5]);
        let w = reduced_neo_hookean(1.0).unwrap();
        let u = knots_to_density(&w, &[0.6, 1.9]).unwrap();
        assert_eq!(u.len(), 1);
        assert!((u.value_stretch(0.6).unwrap() - w.value(0.6)).abs() < 1e-12);
        assert!((u.value_stretch(1.9).unwrap() - w.value(1.9)).abs() < 1e-12);
        let knots = [0.5, 0.7, 1.0, 1.4, 2.0];
        let u = knots_to_density(&w, &knots).unwrap();
        for &k in &knots {
            assert!((u.value_stretch(k).unwrap() - w.value(k)).abs() < 1e-12);
        }
        for x in uniform_grid(0.5, 2.0, 10_000) {
            assert!(u.value_stretch(x).unwrap() >= w.value(x) - 1e-12);
        }
        let lip = w.lipschitz_bound_on(&crate::density::StretchDomain::new(0.5, 2.0).unwrap());
        assert!(u.stretch_pieces().unwrap().iter().all(|p| p.slope.abs() <= lip));
        assert!(knots_to_density(&w, &[1.0]).is_err());
        assert!(matches!(knots_to_density(&w, &[-1.0, 1.0]), Err(Error::DomainViolation { .. })));
    }
}
