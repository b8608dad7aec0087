use serde::{Deserialize, Serialize};

use crate::density::{minors, minors_len, Domain, DomainPolicy, Point, SquareMatrix, StretchDomain};
use crate::error::{invalid, Error, Result};

/// Relative slack used by [`membership_check`].
const MEMBERSHIP_TOLERANCE: f64 = 1e-12;

/// `value(ξ) = offset + slope·ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece1D {
    pub offset: f64,
    pub slope: f64,
}

impl AffinePiece1D {
    pub fn new(offset: f64, slope: f64) -> Self {
        AffinePiece1D { offset, slope }
    }

    #[inline]
    pub fn value(&self, xi: f64) -> f64 {
        self.offset + self.slope * xi
    }
}

/// An affine function of the minors: `offset + ⟨coeffs, Minors(ξ)⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyaffinePiece {
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

impl PolyaffinePiece {
    pub fn new(offset: f64, coeffs: Vec<f64>) -> Self {
        PolyaffinePiece { offset, coeffs }
    }

    #[inline]
    pub fn value_minors(&self, m: &[f64]) -> f64 {
        self.offset + self.coeffs.iter().zip(m).map(|(c, x)| c * x).sum::<f64>()
    }

    pub fn value(&self, xi: &SquareMatrix) -> Result<f64> {
        let m = minors(xi)?;
        if m.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coefficients", m.len()),
                found: format!("{} coefficients", self.coeffs.len()),
            });
        }
        Ok(self.value_minors(m.entries()))
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    Stretch,
    Matrix { n: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Pieces {
    Stretch(Vec<AffinePiece1D>),
    Matrix(Vec<PolyaffinePiece>),
}

/// A trial energy density given as the pointwise maximum of affine (1D) or
/// polyaffine (2D/3D) pieces, with its Lipschitz budget ℓ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct MaxoutDensity {
    kind: DensityKind,
    ell: f64,
    pieces: Pieces,
}

fn check_ell(ell: f64) -> Result<()> {
    if ell.is_finite() && ell > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("Lipschitz budget must be positive and finite, got {ell}")))
    }
}

impl MaxoutDensity {
    pub fn stretch(pieces: Vec<AffinePiece1D>, ell: f64) -> Result<Self> {
        check_ell(ell)?;
        if pieces.is_empty() {
            return Err(invalid("a maxout density needs at least one piece"));
        }
        if pieces.iter().any(|p| !(p.offset.is_finite() && p.slope.is_finite())) {
            return Err(Error::NonFinite("piece coefficients".into()));
        }
        Ok(MaxoutDensity {
            kind: DensityKind::Stretch,
            ell,
            pieces: Pieces::Stretch(pieces),
        })
    }

    pub fn matrix(n: usize, pieces: Vec<PolyaffinePiece>, ell: f64) -> Result<Self> {
        check_ell(ell)?;
        let tau = minors_len(n)?;
        if pieces.is_empty() {
            return Err(invalid("a maxout density needs at least one piece"));
        }
        for p in &pieces {
            if p.coeffs.len() != tau {
                return Err(Error::DimensionMismatch {
                    expected: format!("{tau} coefficients"),
                    found: format!("{} coefficients", p.coeffs.len()),
                });
            }
            if !p.offset.is_finite() || p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("piece coefficients".into()));
            }
        }
        Ok(MaxoutDensity {
            kind: DensityKind::Matrix { n },
            ell,
            pieces: Pieces::Matrix(pieces),
        })
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn len(&self) -> usize {
        match &self.pieces {
            Pieces::Stretch(p) => p.len(),
            Pieces::Matrix(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stretch_pieces(&self) -> Option<&[AffinePiece1D]> {
        match &self.pieces {
            Pieces::Stretch(p) => Some(p),
            Pieces::Matrix(_) => None,
        }
    }

    pub fn matrix_pieces(&self) -> Option<&[PolyaffinePiece]> {
        match &self.pieces {
            Pieces::Matrix(p) => Some(p),
            Pieces::Stretch(_) => None,
        }
    }

    fn expect_stretch(&self) -> Result<&[AffinePiece1D]> {
        self.stretch_pieces().ok_or_else(|| Error::DimensionMismatch {
            expected: "stretch density".into(),
            found: format!("{:?}", self.kind),
        })
    }

    /// Value at a stretch, without a domain check.
    pub fn value_stretch(&self, xi: f64) -> Result<f64> {
        Ok(max_affine(self.expect_stretch()?, xi))
    }

    /// Value at a point of minors space, without a domain check.
    pub fn value_minors(&self, m: &[f64]) -> Result<f64> {
        match &self.pieces {
            Pieces::Matrix(p) => {
                if p[0].coeffs.len() != m.len() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{} minors", p[0].coeffs.len()),
                        found: format!("{} minors", m.len()),
                    });
                }
                Ok(max_polyaffine(p, m))
            }
            Pieces::Stretch(_) => Err(Error::DimensionMismatch {
                expected: "matrix density".into(),
                found: "stretch density".into(),
            }),
        }
    }

    /// Value at a deformation gradient, without a domain check.
    pub fn value_matrix(&self, xi: &SquareMatrix) -> Result<f64> {
        if let DensityKind::Matrix { n } = self.kind {
            if xi.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n}x{n} matrix"),
                    found: format!("{0}x{0} matrix", xi.dim()),
                });
            }
        }
        self.value_minors(minors(xi)?.entries())
    }

    /// Value at `point`, rejecting points outside `domain`.
    pub fn evaluate(&self, point: Point<'_>, domain: &Domain) -> Result<f64> {
        self.evaluate_with(point, domain, DomainPolicy::Reject)
    }

    pub fn evaluate_with(&self, point: Point<'_>, domain: &Domain, policy: DomainPolicy) -> Result<f64> {
        match (point, domain) {
            (Point::Stretch(xi), Domain::Stretch(d)) => {
                if d.contains(xi) {
                    self.value_stretch(xi)
                } else if policy == DomainPolicy::Clamp && xi.is_finite() {
                    self.value_stretch(d.clamp(xi))
                } else {
                    Err(Error::DomainViolation {
                        point: format!("stretch {xi}"),
                        domain: d.to_string(),
                    })
                }
            }
            (Point::Matrix(xi), Domain::Matrix(d)) => {
                if d.contains(xi) {
                    return self.value_matrix(xi);
                }
                let det_ok = xi.det().map(|v| v >= -super::domain::DET_TOLERANCE).unwrap_or(false);
                if policy == DomainPolicy::Clamp && det_ok && xi.dim() == d.n() {
                    let norm = xi.frobenius_norm();
                    return self.value_matrix(&xi.scaled(d.c1() / norm));
                }
                Err(Error::DomainViolation {
                    point: format!("matrix {:?}", xi.entries()),
                    domain: d.to_string(),
                })
            }
            _ => Err(Error::DimensionMismatch {
                expected: format!("point matching {:?}", domain),
                found: format!("{:?}", point),
            }),
        }
    }

    /// Adds `c` to every piece offset.
    pub fn shifted(&self, c: f64) -> Self {
        let pieces = match &self.pieces {
            Pieces::Stretch(p) => Pieces::Stretch(
                p.iter().map(|q| AffinePiece1D::new(q.offset + c, q.slope)).collect(),
            ),
            Pieces::Matrix(p) => Pieces::Matrix(
                p.iter()
                    .map(|q| PolyaffinePiece::new(q.offset + c, q.coeffs.clone()))
                    .collect(),
            ),
        };
        MaxoutDensity {
            kind: self.kind,
            ell: self.ell,
            pieces,
        }
    }

    /// Index of the piece attaining the maximum at `xi`; ties go to the
    /// larger slope, i.e. the piece active just to the right of `xi`.
    pub fn active_piece(&self, xi: f64) -> Result<usize> {
        Ok(active_index(self.expect_stretch()?, xi))
    }
}

#[inline]
pub(crate) fn max_affine(pieces: &[AffinePiece1D], xi: f64) -> f64 {
    pieces
        .iter()
        .map(|p| p.value(xi))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
pub(crate) fn max_polyaffine(pieces: &[PolyaffinePiece], m: &[f64]) -> f64 {
    pieces
        .iter()
        .map(|p| p.value_minors(m))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn active_index(pieces: &[AffinePiece1D], xi: f64) -> usize {
    let mut best = 0;
    let mut best_val = pieces[0].value(xi);
    for (i, p) in pieces.iter().enumerate().skip(1) {
        let v = p.value(xi);
        if v > best_val || (v == best_val && p.slope > pieces[best].slope) {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Removes pieces that lie strictly below the upper envelope everywhere on
/// the real line. A piece is only dropped when its deficit at the crossing
/// of its neighbours clears a margin, so the maximum of the survivors is
/// bit-identical to the maximum of the full set.
fn prune_upper_envelope(mut pieces: Vec<AffinePiece1D>) -> Vec<AffinePiece1D> {
    pieces.sort_by(|a, b| a.slope.total_cmp(&b.slope).then(a.offset.total_cmp(&b.offset)));
    // equal slopes: keep the highest offset (last after sorting)
    let mut distinct: Vec<AffinePiece1D> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match distinct.last_mut() {
            Some(last) if last.slope == p.slope => *last = p,
            _ => distinct.push(p),
        }
    }
    let mut hull: Vec<AffinePiece1D> = Vec::with_capacity(distinct.len());
    for c in distinct {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let x = (a.offset - c.offset) / (c.slope - a.slope);
            let top = a.value(x).max(c.value(x));
            let scale = 1.0 + a.offset.abs() + (a.slope * x).abs() + c.offset.abs() + (c.slope * x).abs();
            if x.is_finite() && b.value(x) < top - 1e-9 * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(c);
    }
    hull
}

/// The lattice join `u ∨ v`.
///
/// 1D pieces are pruned to the upper envelope; nD pieces are concatenated
/// with exact duplicates removed. The Lipschitz budget is `max(ℓ_u, ℓ_v)`.
pub fn join(u: &MaxoutDensity, v: &MaxoutDensity) -> Result<MaxoutDensity> {
    if u.kind != v.kind {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", u.kind),
            found: format!("{:?}", v.kind),
        });
    }
    let ell = u.ell.max(v.ell);
    match (&u.pieces, &v.pieces) {
        (Pieces::Stretch(a), Pieces::Stretch(b)) => {
            let all: Vec<_> = a.iter().chain(b).copied().collect();
            MaxoutDensity::stretch(prune_upper_envelope(all), ell)
        }
        (Pieces::Matrix(a), Pieces::Matrix(b)) => {
            let mut out: Vec<PolyaffinePiece> = Vec::with_capacity(a.len() + b.len());
            for p in a.iter().chain(b) {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            let DensityKind::Matrix { n } = u.kind else { unreachable!() };
            MaxoutDensity::matrix(n, out, ell)
        }
        _ => unreachable!("kinds already compared"),
    }
}

/// Stretches in `domain` where the active piece changes, plus the domain
/// endpoints. Between consecutive returned points the density is affine.
pub fn breakpoints(u: &MaxoutDensity, domain: &StretchDomain) -> Result<Vec<f64>> {
    let pieces = u.expect_stretch()?;
    Ok(envelope_breakpoints(pieces, domain.xi_min(), domain.xi_max()))
}

pub(crate) fn envelope_breakpoints(pieces: &[AffinePiece1D], lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![lo];
    let mut x = lo;
    let mut active = active_index(pieces, lo);
    loop {
        let cur = pieces[active];
        let mut next: Option<(f64, usize)> = None;
        for (i, p) in pieces.iter().enumerate() {
            if p.slope <= cur.slope {
                continue;
            }
            let xc = (cur.offset - p.offset) / (p.slope - cur.slope);
            if !(xc > x) {
                continue;
            }
            next = match next {
                None => Some((xc, i)),
                Some((bx, bi)) if xc < bx || (xc == bx && p.slope > pieces[bi].slope) => Some((xc, i)),
                keep => keep,
            };
        }
        match next {
            Some((xc, i)) if xc < hi => {
                out.push(xc);
                x = xc;
                active = i;
            }
            _ => break,
        }
    }
    if hi > lo {
        out.push(hi);
    }
    out
}

/// Outcome of [`membership_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub passed: bool,
    /// `(piece index, slope magnitude or coefficient norm)` for each offender.
    pub violations: Vec<(usize, f64)>,
}

/// Checks every piece against the Lipschitz budget `ell`.
pub fn membership_check(u: &MaxoutDensity, ell: f64) -> MembershipReport {
    let limit = ell * (1.0 + MEMBERSHIP_TOLERANCE);
    let norms: Vec<f64> = match &u.pieces {
        Pieces::Stretch(p) => p.iter().map(|q| q.slope.abs()).collect(),
        Pieces::Matrix(p) => p.iter().map(PolyaffinePiece::coeff_norm).collect(),
    };
    let violations: Vec<(usize, f64)> = norms
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v > limit)
        .collect();
    MembershipReport {
        passed: violations.is_empty(),
        violations,
    }
}

#[derive(Serialize, Deserialize)]
struct RawPiece {
    offset: f64,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDensity {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    ell: f64,
    pieces: Vec<RawPiece>,
}

impl TryFrom<RawDensity> for MaxoutDensity {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        match raw.kind.as_str() {
            "stretch" => {
                let pieces = raw
                    .pieces
                    .into_iter()
                    .map(|p| match p.coeffs.as_slice() {
                        [slope] => Ok(AffinePiece1D::new(p.offset, *slope)),
                        other => Err(Error::DimensionMismatch {
                            expected: "1 coefficient".into(),
                            found: format!("{} coefficients", other.len()),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                MaxoutDensity::stretch(pieces, raw.ell)
            }
            "matrix" => {
                let n = raw.n.ok_or_else(|| invalid("matrix density requires field n"))?;
                let pieces = raw
                    .pieces
                    .into_iter()
                    .map(|p| PolyaffinePiece::new(p.offset, p.coeffs))
                    .collect();
                MaxoutDensity::matrix(n, pieces, raw.ell)
            }
            other => Err(invalid(format!("unknown density kind {other:?}"))),
        }
    }
}

impl From<MaxoutDensity> for RawDensity {
    fn from(u: MaxoutDensity) -> Self {
        match u.pieces {
            Pieces::Stretch(p) => RawDensity {
                kind: "stretch".into(),
                n: None,
                ell: u.ell,
                pieces: p
                    .into_iter()
                    .map(|q| RawPiece {
                        offset: q.offset,
                        coeffs: vec![q.slope],
                    })
                    .collect(),
            },
            Pieces::Matrix(p) => RawDensity {
                kind: "matrix".into(),
                n: match u.kind {
                    DensityKind::Matrix { n } => Some(n),
                    DensityKind::Stretch => None,
                },
                ell: u.ell,
                pieces: p
                    .into_iter()
                    .map(|q| RawPiece {
                        offset: q.offset,
                        coeffs: q.coeffs,
                    })
                    .collect(),
            },
        }
    }
}
