//! Maxout minorants built from supporting hyperplanes at a δ-cover of the
//! domain. On K the gap `w − u_h` is at most `2ℓ·Lip(Minors|K)·δ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::maxout::{max_affine, max_polyaffine};
use crate::density::{
    minors, minors_len, minors_lipschitz_bound, AffinePiece1D, MatrixDomain, MaxoutDensity,
    PolyaffinePiece, SquareMatrix, StretchDomain,
};
use crate::error::{invalid, Error, Result};
use crate::models::{DensityModel, PolyconvexModel};

/// Overshoot of an exact tangent above w that is still attributed to rounding.
const EXACT_SLACK: f64 = 1e-9;
/// Overshoot of a finite-difference tangent that is repaired by shifting the
/// offset down; anything larger is reported as non-convexity.
const FD_SLACK: f64 = 1e-5;
/// Upper limit on the number of grid points enumerated for a matrix cover.
const MAX_COVER_GRID: usize = 5_000_000;

fn check_spacing(spacing: f64) -> Result<()> {
    if spacing.is_finite() && spacing > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("cover spacing must be positive, got {spacing}")))
    }
}

/// Uniform points on the interval with covering radius at most `spacing`:
/// every stretch lies within `spacing` of some cover point.
pub fn stretch_cover(domain: &StretchDomain, spacing: f64) -> Result<Vec<f64>> {
    check_spacing(spacing)?;
    let intervals = (domain.width() / (2.0 * spacing)).ceil().max(1.0) as usize;
    Ok(crate::numeric::uniform_grid(domain.xi_min(), domain.xi_max(), intervals + 1))
}

fn overshoot_exceeds(overshoot: f64, value: f64, slack: f64) -> bool {
    overshoot > slack * (1.0 + value.abs())
}

/// Tangent construction for a convex 1D density.
pub fn tangent_construction_stretch(
    w: &DensityModel,
    domain: &StretchDomain,
    spacing: f64,
) -> Result<MaxoutDensity> {
    if !w.covers(domain) {
        return Err(Error::DomainViolation {
            point: format!("domain {domain}"),
            domain: format!("{} validity {:?}", w.name(), w.validity()),
        });
    }
    let cover = stretch_cover(domain, spacing)?;
    let exact = w.derivative(cover[0]).is_some();
    let mut probes: Vec<f64> = cover.clone();
    probes.extend(cover.windows(2).map(|p| 0.5 * (p[0] + p[1])));
    let probe_values: Vec<f64> = probes.iter().map(|&x| w.value(x)).collect();
    if probe_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} on {domain}", w.name())));
    }

    let mut pieces = Vec::with_capacity(cover.len());
    for &x in &cover {
        let slope = w.slope(x);
        let mut piece = AffinePiece1D::new(w.value(x) - slope * x, slope);
        let (worst, at) = probes
            .iter()
            .zip(&probe_values)
            .map(|(&p, &v)| (piece.value(p) - v, v))
            .fold((f64::NEG_INFINITY, 0.0), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
        let slack = if exact { EXACT_SLACK } else { FD_SLACK };
        if overshoot_exceeds(worst, at, slack) {
            return Err(Error::ConvexityViolation(format!(
                "tangent of {} at {x} exceeds the density by {worst}",
                w.name()
            )));
        }
        if !exact && worst > 0.0 {
            piece.offset -= worst;
        }
        pieces.push(piece);
    }
    let max_slope = pieces.iter().map(|p| p.slope.abs()).fold(0.0, f64::max);
    let ell = w.lipschitz_bound_on(domain).max(max_slope).max(f64::EPSILON);
    MaxoutDensity::stretch(pieces, ell)
}

fn enumerate_grid(dim: usize, per_axis: usize, lo: f64, step: f64, mut visit: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; dim];
    let mut point = vec![lo; dim];
    loop {
        visit(&point);
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < per_axis {
                point[axis] = lo + step * idx[axis] as f64;
                break;
            }
            idx[axis] = 0;
            point[axis] = lo;
            axis += 1;
        }
    }
}

/// A `spacing`-cover of K: a cubic grid on `[-c1, c1]^{n²}` whose cells have
/// half-diagonal at most `spacing`, restricted to points within `spacing` of
/// K and projected radially onto the norm ball.
pub fn matrix_cover(domain: &MatrixDomain, spacing: f64) -> Result<Vec<SquareMatrix>> {
    check_spacing(spacing)?;
    let n = domain.n();
    let c1 = domain.c1();
    if c1 == 0.0 {
        return Ok(vec![SquareMatrix::zeros(n)]);
    }
    let dim = n * n;
    let step_max = 2.0 * spacing / n as f64;
    let intervals = (2.0 * c1 / step_max).ceil().max(1.0) as usize;
    let per_axis = intervals + 1;
    if (per_axis as f64).powi(dim as i32) > MAX_COVER_GRID as f64 {
        return Err(invalid(format!(
            "cover grid with {per_axis}^{dim} points exceeds the limit of {MAX_COVER_GRID}"
        )));
    }
    let step = 2.0 * c1 / intervals as f64;
    let mut out = Vec::new();
    enumerate_grid(dim, per_axis, -c1, step, |p| {
        let xi = SquareMatrix::new(n, p.to_vec()).expect("grid dimension");
        let norm = xi.frobenius_norm();
        if norm > c1 + spacing {
            return;
        }
        // distance from a 2x2 matrix with det < 0 to {det ≥ 0} is σ_min
        if n == 2 && xi.det().unwrap_or(0.0) < 0.0 && xi.smallest_singular_value_2x2() > spacing {
            return;
        }
        out.push(if norm > c1 { xi.scaled(c1 / norm) } else { xi });
    });
    Ok(out)
}

/// Tangent construction for a polyconvex density `w = g ∘ Minors`.
pub fn tangent_construction_matrix(
    w: &PolyconvexModel,
    domain: &MatrixDomain,
    spacing: f64,
) -> Result<MaxoutDensity> {
    if w.n() != domain.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}D model", domain.n()),
            found: format!("{}D model", w.n()),
        });
    }
    let cover = matrix_cover(domain, spacing)?;
    let tau = minors_len(domain.n())?;
    let exact = w.has_gradient();
    let radius = minors_lipschitz_bound(domain) * spacing;
    let mut pieces = Vec::with_capacity(cover.len());
    let mut probe = vec![0.0; tau];
    for xi in &cover {
        let m = minors(xi)?.into_vec();
        let value = w.value_minors(&m);
        let grad = w.gradient_minors(&m);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("{} at {:?}", w.name(), xi.entries())));
        }
        let offset = value - grad.iter().zip(&m).map(|(g, x)| g * x).sum::<f64>();
        let mut piece = PolyaffinePiece::new(offset, grad);
        // local probe ball in minors space
        let mut worst = f64::NEG_INFINITY;
        let mut worst_at = value;
        for j in 0..tau {
            for r in [-radius, -0.5 * radius, 0.5 * radius, radius] {
                probe.copy_from_slice(&m);
                probe[j] += r;
                let gv = w.value_minors(&probe);
                let over = piece.value_minors(&probe) - gv;
                if over > worst {
                    worst = over;
                    worst_at = gv;
                }
            }
        }
        let slack = if exact { EXACT_SLACK } else { FD_SLACK };
        if overshoot_exceeds(worst, worst_at, slack) {
            return Err(Error::ConvexityViolation(format!(
                "tangent of {} at {:?} exceeds the density by {worst}",
                w.name(),
                xi.entries()
            )));
        }
        if !exact && worst > 0.0 {
            piece.offset -= worst;
        }
        pieces.push(piece);
    }
    let max_norm = pieces.iter().map(PolyaffinePiece::coeff_norm).fold(0.0, f64::max);
    MaxoutDensity::matrix(domain.n(), pieces, w.ell().max(max_norm))
}

/// `max (w − u)` over `points` uniformly spaced stretches of the domain.
pub fn sup_gap_stretch(
    w: &DensityModel,
    u: &MaxoutDensity,
    domain: &StretchDomain,
    points: usize,
) -> Result<f64> {
    let pieces = u.stretch_pieces().ok_or_else(|| Error::DimensionMismatch {
        expected: "stretch density".into(),
        found: format!("{:?}", u.kind()),
    })?;
    let mut worst = f64::NEG_INFINITY;
    for x in crate::numeric::uniform_grid(domain.xi_min(), domain.xi_max(), points.max(2)) {
        let gap = w.value(x) - max_affine(pieces, x);
        if !gap.is_finite() {
            return Err(Error::NonFinite(format!("{} at {x}", w.name())));
        }
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// At least `min_points` probe matrices in K: a filtered cubic grid in 2D,
/// seeded uniform samples in 3D (a 9-dimensional grid is impractical).
pub fn matrix_probe_points(domain: &MatrixDomain, min_points: usize) -> Vec<SquareMatrix> {
    let n = domain.n();
    let c1 = domain.c1();
    if c1 == 0.0 {
        return vec![SquareMatrix::zeros(n)];
    }
    if n == 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        return (0..min_points).map(|_| domain.sample(&mut rng)).collect();
    }
    let mut per_axis = 8usize;
    loop {
        let step = 2.0 * c1 / (per_axis - 1) as f64;
        let mut out = Vec::new();
        enumerate_grid(4, per_axis, -c1, step, |p| {
            let xi = SquareMatrix::new(2, p.to_vec()).expect("grid dimension");
            if domain.contains(&xi) {
                out.push(xi);
            }
        });
        if out.len() >= min_points {
            return out;
        }
        per_axis = (per_axis as f64 * 1.15).ceil() as usize;
    }
}

/// `max (w − u)` over the probe set of [`matrix_probe_points`].
pub fn sup_gap_matrix(
    w: &PolyconvexModel,
    u: &MaxoutDensity,
    domain: &MatrixDomain,
    min_points: usize,
) -> Result<f64> {
    let pieces = u.matrix_pieces().ok_or_else(|| Error::DimensionMismatch {
        expected: "matrix density".into(),
        found: format!("{:?}", u.kind()),
    })?;
    let mut worst = f64::NEG_INFINITY;
    for xi in matrix_probe_points(domain, min_points) {
        let m = minors(&xi)?;
        let gap = w.value_minors(m.entries()) - max_polyaffine(pieces, m.entries());
        if !gap.is_finite() {
            return Err(Error::NonFinite(format!("{} at {:?}", w.name(), xi.entries())));
        }
        worst = worst.max(gap);
    }
    Ok(worst)
}
