use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::SquareMatrix;
use crate::error::{invalid, Error, Result};

/// Accepted slack on `det ξ ≥ 0`.
pub const DET_TOLERANCE: f64 = 1e-12;

/// The set K of admissible deformation gradients:
/// `|ξ| ≤ c1` (Frobenius) and `det ξ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDomain {
    n: usize,
    c1: f64,
}

impl MatrixDomain {
    /// `c1 = 0` is accepted and describes the single point ξ = 0.
    pub fn new(n: usize, c1: f64) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        if !(c1.is_finite() && c1 >= 0.0) {
            return Err(invalid(format!("norm bound c1 must be finite and nonnegative, got {c1}")));
        }
        Ok(MatrixDomain { n, c1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn contains(&self, xi: &SquareMatrix) -> bool {
        xi.dim() == self.n
            && xi.frobenius_norm() <= self.c1 * (1.0 + 1e-15)
            && xi.det().map(|d| d >= -DET_TOLERANCE).unwrap_or(false)
    }

    /// Rejection sample, uniform on K.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SquareMatrix {
        let dim = self.n * self.n;
        loop {
            let e: Vec<f64> = (0..dim).map(|_| rng.gen_range(-self.c1..=self.c1)).collect();
            let xi = SquareMatrix::new(self.n, e).expect("dimension is consistent");
            if self.contains(&xi) {
                return xi;
            }
        }
    }
}

impl std::fmt::Display for MatrixDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "K(n={}, c1={})", self.n, self.c1)
    }
}

/// A closed interval of stretches `[xi_min, xi_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchDomain {
    #[serde(rename = "min")]
    xi_min: f64,
    #[serde(rename = "max")]
    xi_max: f64,
}

impl StretchDomain {
    /// A physical stretch interval: `0 ≤ xi_min < xi_max`.
    pub fn new(xi_min: f64, xi_max: f64) -> Result<Self> {
        let d = Self::interval(xi_min, xi_max)?;
        if xi_min < 0.0 {
            return Err(invalid(format!(
                "stretch domain must satisfy xi_min >= 0, got {xi_min}"
            )));
        }
        Ok(d)
    }

    /// Any finite interval with `lo < hi`, e.g. for approximating densities
    /// written in strain-like variables.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(StretchDomain {
            xi_min: lo,
            xi_max: hi,
        })
    }

    pub fn xi_min(&self) -> f64 {
        self.xi_min
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn width(&self) -> f64 {
        self.xi_max - self.xi_min
    }

    pub fn is_physical(&self) -> bool {
        self.xi_min >= 0.0
    }

    pub fn contains(&self, xi: f64) -> bool {
        xi >= self.xi_min && xi <= self.xi_max
    }

    pub fn clamp(&self, xi: f64) -> f64 {
        xi.clamp(self.xi_min, self.xi_max)
    }
}

impl std::fmt::Display for StretchDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.xi_min, self.xi_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Stretch(StretchDomain),
    Matrix(MatrixDomain),
}

impl From<StretchDomain> for Domain {
    fn from(d: StretchDomain) -> Self {
        Domain::Stretch(d)
    }
}

impl From<MatrixDomain> for Domain {
    fn from(d: MatrixDomain) -> Self {
        Domain::Matrix(d)
    }
}

/// An evaluation point of a density.
#[derive(Clone, Copy, Debug)]
pub enum Point<'a> {
    Stretch(f64),
    Matrix(&'a SquareMatrix),
}

/// What to do with points outside the evaluation domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DomainPolicy {
    #[default]
    Reject,
    /// Stretches are clamped to the interval; matrices are scaled radially
    /// onto the norm ball. Matrices with negative determinant are still
    /// rejected.
    Clamp,
}
