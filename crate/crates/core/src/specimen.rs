//! Simulated test specimens: bar assemblies under a prescribed end
//! displacement δ, and affine cells under an affine boundary deformation.
//!
//! For convex densities the equilibrium state of every bar is uniform, so
//! both the measured energy E₀(δ) and the trial energy E(u; δ) are exact sums
//! over members: `Σ_k A_k L_k · w(1 + δ/L_k)`.

use serde::{Deserialize, Serialize};

use crate::density::maxout::max_affine;
use crate::density::{MaxoutDensity, SquareMatrix, StretchDomain};
use crate::error::{invalid, Error, Result};
use crate::models::{DensityModel, PolyconvexModel};
use crate::numeric::uniform_grid;
use crate::profile::ConvexProfile;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarMember {
    pub area: f64,
    pub length: f64,
}

impl BarMember {
    pub fn new(area: f64, length: f64) -> Result<Self> {
        for (what, v) in [("area", area), ("length", length)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("bar {what} must be positive, got {v}")));
            }
        }
        Ok(BarMember { area, length })
    }

    /// Uniform stretch under end displacement δ.
    #[inline]
    pub fn stretch(&self, delta: f64) -> f64 {
        1.0 + delta / self.length
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.area * self.length
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Specimen {
    OneBar(BarMember),
    ParallelBars(Vec<BarMember>),
    AffineCell { volume: f64, n: usize },
}

/// An interval M = [δ_min, δ_max] of boundary displacements with a sample
/// count used when materializing datasets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProgram {
    pub delta_min: f64,
    pub delta_max: f64,
    #[serde(rename = "samples")]
    pub sample_count: usize,
}

pub const DEFAULT_SAMPLE_COUNT: usize = 101;

impl BoundaryProgram {
    pub fn new(delta_min: f64, delta_max: f64, sample_count: usize) -> Result<Self> {
        if !(delta_min.is_finite() && delta_max.is_finite() && delta_min < delta_max) {
            return Err(invalid(format!(
                "boundary program requires delta_min < delta_max, got [{delta_min}, {delta_max}]"
            )));
        }
        if sample_count < 2 {
            return Err(invalid("boundary program needs at least two samples"));
        }
        Ok(BoundaryProgram {
            delta_min,
            delta_max,
            sample_count,
        })
    }

    pub fn with_samples(self, sample_count: usize) -> Result<Self> {
        Self::new(self.delta_min, self.delta_max, sample_count)
    }

    pub fn width(&self) -> f64 {
        self.delta_max - self.delta_min
    }

    pub fn contains(&self, delta: f64) -> bool {
        delta >= self.delta_min && delta <= self.delta_max
    }

    /// `self ⊆ other` as intervals.
    pub fn is_within(&self, other: &BoundaryProgram) -> bool {
        self.delta_min >= other.delta_min && self.delta_max <= other.delta_max
    }

    /// Uniformly spaced samples including both endpoints.
    pub fn samples(&self) -> Vec<f64> {
        uniform_grid(self.delta_min, self.delta_max, self.sample_count)
    }
}

/// One boundary test: imposed displacement and total equilibrium energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeasurement {
    pub delta: f64,
    pub energy: f64,
}

impl Specimen {
    pub fn one_bar(member: BarMember) -> Self {
        Specimen::OneBar(member)
    }

    pub fn parallel_bars(members: Vec<BarMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("parallel bar assembly needs at least one member"));
        }
        Ok(Specimen::ParallelBars(members))
    }

    pub fn affine_cell(volume: f64, n: usize) -> Result<Self> {
        if !(volume.is_finite() && volume > 0.0) {
            return Err(invalid(format!("cell volume must be positive, got {volume}")));
        }
        if n != 2 && n != 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        Ok(Specimen::AffineCell { volume, n })
    }

    /// Bar members; empty for an affine cell.
    pub fn members(&self) -> &[BarMember] {
        match self {
            Specimen::OneBar(m) => std::slice::from_ref(m),
            Specimen::ParallelBars(ms) => ms,
            Specimen::AffineCell { .. } => &[],
        }
    }

    pub fn is_bar(&self) -> bool {
        !matches!(self, Specimen::AffineCell { .. })
    }

    /// Total reference volume: Σ A_k L_k for bars, |Ω| for a cell. This is the
    /// Lipschitz constant of u ↦ E(u; δ) in the sup norm.
    pub fn total_volume(&self) -> f64 {
        match self {
            Specimen::AffineCell { volume, .. } => *volume,
            _ => self.members().iter().map(BarMember::volume).sum(),
        }
    }

    fn require_bars(&self) -> Result<&[BarMember]> {
        if self.is_bar() {
            Ok(self.members())
        } else {
            Err(invalid("operation requires a bar specimen"))
        }
    }

    pub fn stretches(&self, delta: f64) -> Vec<f64> {
        self.members().iter().map(|m| m.stretch(delta)).collect()
    }

    /// The stretch interval swept by the members over `program`.
    pub fn covered_stretches(&self, program: &BoundaryProgram) -> Result<StretchDomain> {
        let members = self.require_bars()?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in members {
            for d in [program.delta_min, program.delta_max] {
                lo = lo.min(m.stretch(d));
                hi = hi.max(m.stretch(d));
            }
        }
        StretchDomain::interval(lo, hi)
    }

    /// The largest δ-interval keeping every member stretch inside the domain:
    /// `[max_k (k_min − 1)L_k, min_k (k_max − 1)L_k]`.
    pub fn admissible_program(&self, domain: &StretchDomain) -> Result<BoundaryProgram> {
        let members = self.require_bars()?;
        let lo = members
            .iter()
            .map(|m| (domain.xi_min() - 1.0) * m.length)
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = members
            .iter()
            .map(|m| (domain.xi_max() - 1.0) * m.length)
            .fold(f64::INFINITY, f64::min);
        if !(lo < hi) {
            return Err(Error::InfeasibleProgram { lo, hi });
        }
        BoundaryProgram::new(lo, hi, DEFAULT_SAMPLE_COUNT)
    }

    fn check_measurable(w: &DensityModel) -> Result<()> {
        if w.is_convex() {
            Ok(())
        } else {
            Err(Error::ConvexityViolation(format!(
                "{}: equilibrium energies are only exact for convex densities",
                w.name()
            )))
        }
    }

    /// Measured equilibrium energy E₀(δ) = Σ A_k L_k w(1 + δ/L_k).
    pub fn measure_energy(&self, w: &DensityModel, delta: f64) -> Result<f64> {
        Self::check_measurable(w)?;
        let members = self.require_bars()?;
        let mut total = 0.0;
        for m in members {
            total += m.volume() * w.evaluate(m.stretch(delta))?;
        }
        Ok(total)
    }

    /// |Ω|·w(ξ) for an affine cell under boundary deformation ξx.
    pub fn measure_cell_energy(&self, w: &PolyconvexModel, xi: &SquareMatrix) -> Result<f64> {
        match self {
            Specimen::AffineCell { volume, n } if *n == xi.dim() => Ok(volume * w.evaluate(xi)?),
            Specimen::AffineCell { n, .. } => Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} boundary deformation"),
                found: format!("{0}x{0}", xi.dim()),
            }),
            _ => Err(invalid("matrix boundary data requires an affine cell")),
        }
    }

    /// Trial energy E(u; δ) = Σ A_k L_k u(1 + δ/L_k) for a 1D maxout density.
    pub fn aggregate_energy(&self, u: &MaxoutDensity, delta: f64) -> Result<f64> {
        let members = self.require_bars()?;
        let pieces = u.stretch_pieces().ok_or_else(|| Error::DimensionMismatch {
            expected: "stretch density".into(),
            found: format!("{:?}", u.kind()),
        })?;
        Ok(aggregate(members, pieces, delta))
    }

    pub fn aggregate_cell_energy(&self, u: &MaxoutDensity, xi: &SquareMatrix) -> Result<f64> {
        match self {
            Specimen::AffineCell { volume, .. } => Ok(volume * u.value_matrix(xi)?),
            _ => Err(invalid("matrix boundary data requires an affine cell")),
        }
    }

    /// Measurements at the program's uniform samples.
    pub fn generate_dataset(
        &self,
        w: &DensityModel,
        program: &BoundaryProgram,
    ) -> Result<Vec<EnergyMeasurement>> {
        program
            .samples()
            .into_iter()
            .map(|delta| {
                Ok(EnergyMeasurement {
                    delta,
                    energy: self.measure_energy(w, delta)?,
                })
            })
            .collect()
    }

    /// E₀ as a convex profile in δ.
    pub fn energy_profile<'a>(&'a self, w: &'a DensityModel) -> Result<MeasuredEnergy<'a>> {
        Self::check_measurable(w)?;
        Ok(MeasuredEnergy {
            members: self.require_bars()?,
            model: w,
        })
    }
}

#[inline]
pub(crate) fn aggregate(members: &[crate::specimen::BarMember], pieces: &[crate::density::AffinePiece1D], delta: f64) -> f64 {
    members
        .iter()
        .map(|m| m.volume() * max_affine(pieces, m.stretch(delta)))
        .sum()
}

/// δ ↦ E₀(δ) for a bar specimen, with derivative Σ A_k w'(1 + δ/L_k).
#[derive(Clone, Copy, Debug)]
pub struct MeasuredEnergy<'a> {
    members: &'a [BarMember],
    model: &'a DensityModel,
}

impl ConvexProfile for MeasuredEnergy<'_> {
    fn value(&self, delta: f64) -> f64 {
        self.members
            .iter()
            .map(|m| m.volume() * self.model.value(m.stretch(delta)))
            .sum()
    }

    fn slope(&self, delta: f64) -> Option<f64> {
        let mut total = 0.0;
        for m in self.members {
            total += m.area * self.model.derivative(m.stretch(delta))?;
        }
        Some(total)
    }
}
