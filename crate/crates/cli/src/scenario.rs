//! Scenario files: specimen, ground-truth model, stretch domain, boundary
//! program and solver settings.

use std::path::Path;

use serde::Deserialize;

use matlaw_core::{
    custom_density, neo_hookean_principal, quadratic_density, reduced_neo_hookean, uniaxial_reduction,
    BarMember, BoundaryProgram, CustomDensity, DensityModel, Specimen, StretchDomain,
};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub specimen: SpecimenSpec,
    pub model: ModelSpec,
    pub stretch_domain: DomainSpec,
    #[serde(default)]
    pub program: ProgramSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpecimenSpec {
    OneBar { member: MemberSpec },
    ParallelBars { members: Vec<MemberSpec> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub area: f64,
    pub length: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Quadratic { modulus: f64 },
    NeoHookean { mu: f64 },
    /// The principal-stretch Neo-Hookean model restricted to uniaxial states.
    UniaxialNeoHookean { mu: f64 },
    /// A convex density given as the maximum of affine pieces.
    Maxout { pieces: Vec<PieceSpec> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub offset: f64,
    pub slope: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub min: f64,
    pub max: f64,
}

/// Boundary program in displacements δ or, when every member has the same
/// length L, in end positions g = L + δ. Omitted bounds default to the
/// admissible program of the stretch domain.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub position_min: Option<f64>,
    pub position_max: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Continuum,
    Grid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Continuum => "continuum",
            Mode::Grid => "grid",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "N_list")]
    pub n_list: Option<Vec<usize>>,
    pub mode: Option<Mode>,
    pub tol_z: Option<f64>,
    pub tol_x_rel: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub inject_infeasible: bool,
    pub separating_power: Option<f64>,
    pub separating_lambda: Option<f64>,
    pub spacings: Option<Vec<f64>>,
    pub samples: Option<usize>,
}

pub const DEFAULT_SAMPLES: usize = 101;

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid scenario {}: {e}", path.display())))?;
        if scenario.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                scenario.schema_version
            )));
        }
        Ok(scenario)
    }

    pub fn specimen(&self) -> Result<Specimen, CliError> {
        let member = |m: &MemberSpec| BarMember::new(m.area, m.length).map_err(CliError::config);
        match &self.specimen {
            SpecimenSpec::OneBar { member: m } => Ok(Specimen::one_bar(member(m)?)),
            SpecimenSpec::ParallelBars { members } => {
                let ms = members.iter().map(member).collect::<Result<Vec<_>, _>>()?;
                Specimen::parallel_bars(ms).map_err(CliError::config)
            }
        }
    }

    pub fn model(&self) -> Result<DensityModel, CliError> {
        match &self.model {
            ModelSpec::Quadratic { modulus } => quadratic_density(*modulus).map_err(CliError::config),
            ModelSpec::NeoHookean { mu } => reduced_neo_hookean(*mu).map_err(CliError::config),
            ModelSpec::UniaxialNeoHookean { mu } => {
                Ok(uniaxial_reduction(&neo_hookean_principal(*mu).map_err(CliError::config)?))
            }
            ModelSpec::Maxout { pieces } => maxout_model(pieces),
        }
    }

    pub fn stretch_domain(&self) -> Result<StretchDomain, CliError> {
        StretchDomain::new(self.stretch_domain.min, self.stretch_domain.max).map_err(CliError::config)
    }

    /// The program to run: the explicit one when given, the admissible one
    /// otherwise. An empty admissible program, or an explicit program that
    /// leaves the stretch domain, is an infeasibility.
    pub fn program(&self, specimen: &Specimen) -> Result<BoundaryProgram, CliError> {
        let domain = self.stretch_domain()?;
        let admissible = specimen.admissible_program(&domain).map_err(CliError::from_core)?;
        let p = &self.program;
        let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
        let (lo, hi) = match (p.delta_min, p.delta_max, p.position_min, p.position_max) {
            (None, None, None, None) => (admissible.delta_min, admissible.delta_max),
            (Some(a), Some(b), None, None) => (a, b),
            (None, None, Some(a), Some(b)) => {
                let length = common_length(specimen)?;
                (a - length, b - length)
            }
            _ => {
                return Err(CliError::Config(
                    "program needs both delta_min and delta_max, or both position_min and position_max".into(),
                ))
            }
        };
        let program = BoundaryProgram::new(lo, hi, samples).map_err(CliError::config)?;
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if program.delta_min < admissible.delta_min - slack || program.delta_max > admissible.delta_max + slack {
            return Err(CliError::Infeasible(format!(
                "program [{lo}, {hi}] leaves the admissible interval [{}, {}] of stretch domain [{}, {}]",
                admissible.delta_min,
                admissible.delta_max,
                domain.xi_min(),
                domain.xi_max()
            )));
        }
        Ok(program)
    }
}

fn common_length(specimen: &Specimen) -> Result<f64, CliError> {
    let members = specimen.members();
    let length = members[0].length;
    if members.iter().any(|m| m.length != length) {
        return Err(CliError::Config("end positions need members of equal length; give delta_min/delta_max".into()));
    }
    Ok(length)
}

fn maxout_model(pieces: &[PieceSpec]) -> Result<DensityModel, CliError> {
    if pieces.is_empty() {
        return Err(CliError::Config("maxout model needs at least one piece".into()));
    }
    let p: Vec<PieceSpec> = pieces.to_vec();
    let q = p.clone();
    let value = move |x: f64| p.iter().map(|c| c.offset + c.slope * x).fold(f64::NEG_INFINITY, f64::max);
    let derivative = move |x: f64| {
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &q {
            let v = c.offset + c.slope * x;
            if v > best.0 || (v == best.0 && c.slope > best.1) {
                best = (v, c.slope);
            }
        }
        best.1
    };
    let lipschitz = pieces.iter().map(|c| c.slope.abs()).fold(f64::EPSILON, f64::max);
    custom_density(CustomDensity::new("maxout", value, lipschitz, true).with_derivative(derivative))
        .map_err(CliError::config)
}
