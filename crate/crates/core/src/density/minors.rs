use serde::{Deserialize, Serialize};

use crate::density::MatrixDomain;
use crate::error::{Error, Result};

/// A square real matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", n * n),
                found: format!("{} entries", entries.len()),
            });
        }
        Ok(SquareMatrix { n, entries })
    }

    pub fn from_rows<const N: usize>(rows: [[f64; N]; N]) -> Self {
        SquareMatrix {
            n: N,
            entries: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        SquareMatrix { n, entries }
    }

    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SquareMatrix {
            n: self.n,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    /// `self + t * a ⊗ b`.
    pub fn add_rank_one(&self, t: f64, a: &[f64], b: &[f64]) -> Self {
        let n = self.n;
        let mut out = self.clone();
        for (row, ai) in out.entries.chunks_mut(n).zip(a) {
            for (x, bj) in row.iter_mut().zip(b) {
                *x += t * ai * bj;
            }
        }
        out
    }

    pub fn distance(&self, other: &SquareMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn det(&self) -> Result<f64> {
        let m = |i, j| self.get(i, j);
        match self.n {
            1 => Ok(m(0, 0)),
            2 => Ok(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)),
            3 => Ok(m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))),
            n => Err(Error::UnsupportedDimension(n)),
        }
    }

    /// Cofactor matrix, `cof ξ = det(ξ) ξ^{-T}` for invertible ξ.
    pub fn cofactor(&self) -> Result<SquareMatrix> {
        let m = |i, j| self.get(i, j);
        match self.n {
            2 => Ok(SquareMatrix::from_rows([[m(1, 1), -m(1, 0)], [-m(0, 1), m(0, 0)]])),
            3 => {
                let mut c = [[0.0; 3]; 3];
                for (i, row) in c.iter_mut().enumerate() {
                    let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
                    for (j, entry) in row.iter_mut().enumerate() {
                        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
                        // cyclic index order absorbs the (-1)^{i+j} sign
                        *entry = m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
                    }
                }
                Ok(SquareMatrix::from_rows(c))
            }
            n => Err(Error::UnsupportedDimension(n)),
        }
    }

    /// Smallest singular value of a 2x2 matrix; the distance to the set of
    /// singular matrices.
    pub(crate) fn smallest_singular_value_2x2(&self) -> f64 {
        let f2 = self.entries.iter().map(|x| x * x).sum::<f64>();
        let d = self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0);
        let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
        (0.5 * (f2 - disc)).max(0.0).sqrt()
    }
}

/// Number of minors τ(n): 5 in 2D, 19 in 3D.
pub fn minors_len(n: usize) -> Result<usize> {
    match n {
        2 => Ok(5),
        3 => Ok(19),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

/// The vector of minors of a deformation gradient.
///
/// Ordering: the n² entries of ξ row-major, then (3D only) the nine entries
/// of cof ξ row-major, then det ξ.
#[derive(Clone, Debug, PartialEq)]
pub struct MinorsVector {
    n: usize,
    entries: Vec<f64>,
}

impl MinorsVector {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }
}

pub fn minors(xi: &SquareMatrix) -> Result<MinorsVector> {
    let n = xi.dim();
    let len = minors_len(n)?;
    let mut entries = Vec::with_capacity(len);
    entries.extend_from_slice(xi.entries());
    if n == 3 {
        entries.extend_from_slice(xi.cofactor()?.entries());
    }
    entries.push(xi.det()?);
    debug_assert_eq!(entries.len(), len);
    Ok(MinorsVector { n, entries })
}

/// Upper bound on the Lipschitz constant of ξ ↦ Minors(ξ) on the Frobenius
/// ball of radius c1 (which contains K).
///
/// The identity block contributes 1. In 2D, `|∇det ξ| = |cof ξ| = |ξ| ≤ c1`.
/// In 3D every cofactor entry is a 2x2 minor whose gradient has norm at most
/// the norm of its submatrix; each entry of ξ sits in four submatrices, so
/// `|D cof ξ| ≤ 2|ξ|`, and `|cof ξ| ≤ |ξ|²/√3` bounds the determinant
/// gradient.
pub fn minors_lipschitz_bound(domain: &MatrixDomain) -> f64 {
    let c1 = domain.c1();
    let (b_cof, b_det) = match domain.n() {
        2 => (0.0, c1),
        _ => (2.0 * c1, c1 * c1 / 3f64.sqrt()),
    };
    (1.0 + b_cof * b_cof + b_det * b_det).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Laplace expansion along the first row; independent of the closed forms.
    fn det_by_expansion(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        (0..n)
            .map(|j| {
                let sub: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det_by_expansion(&sub)
            })
            .sum()
    }

    fn rows(x: &SquareMatrix) -> Vec<Vec<f64>> {
        (0..x.dim())
            .map(|i| (0..x.dim()).map(|j| x.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn minors_of_identity() {
        assert_eq!(
            minors(&SquareMatrix::identity(2)).unwrap().entries(),
            &[1.0, 0.0, 0.0, 1.0, 1.0]
        );
        let m3 = minors(&SquareMatrix::identity(3)).unwrap();
        let eye = SquareMatrix::identity(3);
        let mut expected = eye.entries().to_vec();
        expected.extend_from_slice(eye.entries());
        expected.push(1.0);
        assert_eq!(m3.entries(), expected.as_slice());
        assert_eq!(m3.len(), 19);
    }

    #[test]
    fn minors_of_upper_triangular() {
        let xi = SquareMatrix::from_rows([[2.0, 1.0], [0.0, 3.0]]);
        assert_eq!(det_by_expansion(&rows(&xi)), 6.0);
        assert_eq!(minors(&xi).unwrap().entries(), &[2.0, 1.0, 0.0, 3.0, 6.0]);
    }

    #[test]
    fn unsupported_dimensions() {
        assert!(matches!(
            minors(&SquareMatrix::identity(4)),
            Err(Error::UnsupportedDimension(4))
        ));
        assert!(matches!(
            minors(&SquareMatrix::identity(1)),
            Err(Error::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn determinant_and_cofactor_match_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3] {
            for _ in 0..200 {
                let e: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let xi = SquareMatrix::new(n, e).unwrap();
                let r = rows(&xi);
                assert!((xi.det().unwrap() - det_by_expansion(&r)).abs() < 1e-12);
                // cof_ij = (-1)^{i+j} det(minor_ij)
                let cof = xi.cofactor().unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let sub: Vec<Vec<f64>> = r
                            .iter()
                            .enumerate()
                            .filter(|(a, _)| *a != i)
                            .map(|(_, row)| {
                                row.iter()
                                    .enumerate()
                                    .filter(|(b, _)| *b != j)
                                    .map(|(_, v)| *v)
                                    .collect()
                            })
                            .collect();
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        assert!((cof.get(i, j) - sign * det_by_expansion(&sub)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    fn sampled_ratio(domain: &MatrixDomain, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        while count < pairs {
            let a = domain.sample(&mut rng);
            // nearby partners probe the local gradient, far ones the secant
            let b = if count % 2 == 0 {
                domain.sample(&mut rng)
            } else {
                let h: Vec<f64> = a.entries().iter().map(|x| x + rng.gen_range(-1e-3..1e-3)).collect();
                let b = SquareMatrix::new(domain.n(), h).unwrap();
                if !domain.contains(&b) {
                    continue;
                }
                b
            };
            let d = a.distance(&b);
            if d == 0.0 {
                continue;
            }
            let ma = minors(&a).unwrap();
            let mb = minors(&b).unwrap();
            let dm = ma
                .entries()
                .iter()
                .zip(mb.entries())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(dm / d);
            count += 1;
        }
        worst
    }

    #[test]
    fn lipschitz_bound_dominates_sampled_ratios() {
        let d2 = MatrixDomain::new(2, 1.0).unwrap();
        let b2 = minors_lipschitz_bound(&d2);
        assert!(b2 >= 2f64.sqrt() - 1e-15);
        assert!(sampled_ratio(&d2, 100_000, 1) <= b2);

        let d3 = MatrixDomain::new(3, 2.0).unwrap();
        let b3 = minors_lipschitz_bound(&d3);
        assert!(b3.is_finite());
        assert!(sampled_ratio(&d3, 100_000, 2) <= b3);
    }

    #[test]
    fn degenerate_domain_bound_is_identity_block() {
        let d = MatrixDomain::new(2, 0.0).unwrap();
        assert!(minors_lipschitz_bound(&d) >= 1.0);
    }
}
