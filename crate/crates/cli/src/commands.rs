use std::path::{Path, PathBuf};

use serde::Serialize;

use matlaw_core::diagnostics::{
    constraint_convexity_probe, density_bound_check_stretch, length_ratio, lipschitz_in_u_check,
    monotonicity_check, separating_decay_check, DiagnosticReport,
};
use matlaw_core::identify::{check_chain, convergence_records_on, CostEvaluation};
use matlaw_core::{
    cost_j, equalize_knots, knots_to_density, uniform_interpolant, BarMember, BoundaryProgram, DensityModel,
    EnergyMeasurement, EqualizeOptions, IdentificationResult, KnotSpace, MeasuredEnergy, Reference, Specimen,
};

use crate::output::{fmt_f64, write_json, Csv};
use crate::scenario::{Mode, Scenario, SCHEMA_VERSION};
use crate::CliError;

pub struct Run {
    pub scenario: Scenario,
    pub neurons: Option<usize>,
    pub neurons_list: Option<Vec<usize>>,
    pub mode: Option<Mode>,
    pub out: PathBuf,
}

pub const DIAGNOSTIC_CHECKS: [&str; 5] = [
    "monotonicity",
    "lipschitz_in_u",
    "separating_defect",
    "density_bound",
    "constraint_convexity",
];

const DEFAULT_N: usize = 4;
const DEFAULT_DIAGNOSTIC_SAMPLES: usize = 1000;
const DENSITY_PROBES: usize = 100_001;
const INFEASIBLE_SHIFT: f64 = 1e-3;

struct Setup {
    specimen: Specimen,
    model: DensityModel,
    program: BoundaryProgram,
    mode: Mode,
}

impl Run {
    fn setup(&self) -> Result<Setup, CliError> {
        let specimen = self.scenario.specimen()?;
        let model = self.scenario.model()?;
        let program = self.scenario.program(&specimen)?;
        let mode = self.mode.or(self.scenario.solver.mode).unwrap_or_default();
        Ok(Setup {
            specimen,
            model,
            program,
            mode,
        })
    }

    fn piece_count(&self) -> Option<usize> {
        self.neurons.or(self.scenario.solver.n)
    }

    fn equalize_options(&self) -> EqualizeOptions {
        let s = &self.scenario.solver;
        let d = EqualizeOptions::default();
        EqualizeOptions {
            tol_z: s.tol_z.unwrap_or(d.tol_z),
            tol_x_rel: s.tol_x_rel.unwrap_or(d.tol_x_rel),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
        }
    }
}

impl Setup {
    fn profile(&self) -> Result<MeasuredEnergy<'_>, CliError> {
        self.specimen.energy_profile(&self.model).map_err(CliError::from_core)
    }

    fn dataset(&self) -> Result<Vec<EnergyMeasurement>, CliError> {
        self.specimen
            .generate_dataset(&self.model, &self.program)
            .map_err(CliError::from_core)
    }
}

/// Builds the reference for the chosen mode and hands it to `f`.
fn with_reference<T>(
    setup: &Setup,
    f: impl FnOnce(Reference<'_>) -> Result<T, CliError>,
) -> Result<T, CliError> {
    match setup.mode {
        Mode::Continuum => {
            let e0 = setup.profile()?;
            f(Reference::Continuum(&e0))
        }
        Mode::Grid => {
            let data = setup.dataset()?;
            f(Reference::Grid(&data))
        }
    }
}

fn require_n(n: usize) -> Result<usize, CliError> {
    if n == 0 {
        Err(CliError::Config("piece count N must be at least 1".into()))
    } else {
        Ok(n)
    }
}

pub fn simulate(run: &Run) -> Result<(), CliError> {
    let setup = run.setup()?;
    let data = setup.dataset()?;
    let mut csv = Csv::new(&["delta", "energy"]);
    for m in &data {
        csv.row(&[fmt_f64(m.delta), fmt_f64(m.energy)]);
    }
    csv.write(&run.out)?;
    let lo = data.iter().map(|m| m.energy).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|m| m.energy).fold(f64::NEG_INFINITY, f64::max);
    println!(
        "simulate: {} samples on [{}, {}], energy in [{}, {}] -> {}",
        data.len(),
        setup.program.delta_min,
        setup.program.delta_max,
        fmt_f64(lo),
        fmt_f64(hi),
        run.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IdentifyDocument<'a> {
    schema_version: u32,
    command: &'static str,
    mode: &'static str,
    #[serde(rename = "N")]
    n: usize,
    model: String,
    members: &'a [BarMember],
    program: &'a BoundaryProgram,
    #[serde(flatten)]
    evaluation: CostEvaluation,
    result: &'a IdentificationResult,
}

#[derive(Serialize)]
struct PartialDocument<'a> {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    message: &'a str,
    result: Option<&'a IdentificationResult>,
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".partial");
    PathBuf::from(name)
}

/// One bar: knots are placed in δ on the measured energy and the density is
/// the chord majorant of w at the corresponding stretches. Several bars: the
/// chord majorant of w is equalized on the stretches the program covers.
fn solve(run: &Run, setup: &Setup, n: usize) -> Result<IdentificationResult, CliError> {
    let opts = run.equalize_options();
    match &setup.specimen {
        Specimen::OneBar(member) => {
            let e0 = setup.profile()?;
            let to_stretch = |r: &mut IdentificationResult| -> Result<(), CliError> {
                let stretches: Vec<f64> = r.knots.iter().map(|&d| member.stretch(d)).collect();
                r.density = knots_to_density(&setup.model, &stretches).map_err(CliError::from_core)?;
                Ok(())
            };
            match equalize_knots(&e0, setup.program.delta_min, setup.program.delta_max, n, &opts) {
                Ok(mut r) => {
                    to_stretch(&mut r)?;
                    Ok(r)
                }
                Err(e) => match CliError::from_core(e) {
                    CliError::Solver { message, partial } => {
                        let partial = match partial {
                            Some(mut p) => {
                                to_stretch(&mut p)?;
                                Some(p)
                            }
                            None => None,
                        };
                        Err(CliError::Solver { message, partial })
                    }
                    other => Err(other),
                },
            }
        }
        specimen => {
            let k = specimen.covered_stretches(&setup.program).map_err(CliError::from_core)?;
            if !setup.model.covers(&k) {
                return Err(CliError::Config(format!("model {} is not defined on {k}", setup.model.name())));
            }
            let mut r =
                equalize_knots(&setup.model, k.xi_min(), k.xi_max(), n, &opts).map_err(CliError::from_core)?;
            r.knot_space = KnotSpace::Stretch;
            Ok(r)
        }
    }
}

pub fn identify(run: &Run) -> Result<(), CliError> {
    let setup = run.setup()?;
    let n = require_n(
        run.piece_count()
            .ok_or_else(|| CliError::Config("identify needs --neurons or solver.N".into()))?,
    )?;
    let result = match solve(run, &setup, n) {
        Ok(r) => r,
        Err(CliError::Solver { message, partial }) => {
            let path = partial_path(&run.out);
            write_json(
                &path,
                &PartialDocument {
                    schema_version: SCHEMA_VERSION,
                    command: "identify",
                    status: "partial",
                    message: &message,
                    result: partial.as_deref(),
                },
            )?;
            eprintln!("best iterate written to {}", path.display());
            return Err(CliError::Solver { message, partial });
        }
        Err(e) => return Err(e),
    };
    let evaluation = with_reference(&setup, |r| {
        cost_j(&setup.specimen, &result.density, r, &setup.program).map_err(CliError::from_core)
    })?;
    write_json(
        &run.out,
        &IdentifyDocument {
            schema_version: SCHEMA_VERSION,
            command: "identify",
            mode: setup.mode.as_str(),
            n,
            model: setup.model.name(),
            members: setup.specimen.members(),
            program: &setup.program,
            evaluation,
            result: &result,
        },
    )?;
    println!(
        "identify: N = {n}, J = {} ({} mode), knots {:?} -> {}",
        fmt_f64(evaluation.cost),
        setup.mode.as_str(),
        result.knots,
        run.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceDocument<'a> {
    schema_version: u32,
    command: &'static str,
    mode: &'static str,
    model: String,
    records: &'a [matlaw_core::ConvergenceRecord],
}

pub fn convergence(run: &Run) -> Result<(), CliError> {
    let setup = run.setup()?;
    let n_list = match (&run.neurons_list, run.neurons, &run.scenario.solver.n_list, run.scenario.solver.n) {
        (Some(list), _, _, _) => list.clone(),
        (None, Some(n), _, _) => vec![n],
        (None, None, Some(list), _) => list.clone(),
        (None, None, None, Some(n)) => vec![n],
        _ => return Err(CliError::Config("convergence needs --neurons-list or solver.N_list".into())),
    };
    for &n in &n_list {
        require_n(n)?;
    }
    let records = with_reference(&setup, |r| {
        convergence_records_on(&setup.specimen, &setup.model, &setup.program, r, &n_list)
            .map_err(CliError::from_core)
    })?;
    check_chain(&records).map_err(CliError::from_core)?;
    let is_json = run.out.extension().is_some_and(|e| e == "json");
    if is_json {
        write_json(
            &run.out,
            &ConvergenceDocument {
                schema_version: SCHEMA_VERSION,
                command: "convergence",
                mode: setup.mode.as_str(),
                model: setup.model.name(),
                records: &records,
            },
        )?;
    } else {
        let mut csv = Csv::new(&["N", "cost_optimal", "cost_interpolant", "bound_lipschitz", "bound_c2"]);
        for r in &records {
            csv.row(&[
                r.n.to_string(),
                fmt_f64(r.cost_optimal),
                fmt_f64(r.cost_interpolant),
                fmt_f64(r.bound_lipschitz),
                fmt_f64(r.bound_c2),
            ]);
        }
        csv.write(&run.out)?;
    }
    println!("{:>5}  {:>24}  {:>24}  {:>24}", "N", "J(u_N*)", "J(f_N)", "bound");
    for r in &records {
        println!(
            "{:>5}  {:>24}  {:>24}  {:>24}",
            r.n,
            fmt_f64(r.cost_optimal),
            fmt_f64(r.cost_interpolant),
            fmt_f64(r.bound())
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseDocument<'a> {
    schema_version: u32,
    command: &'static str,
    mode: &'static str,
    #[serde(rename = "N")]
    n: usize,
    passed: bool,
    notes: &'a [String],
    reports: &'a [DiagnosticReport],
}

pub fn diagnose(run: &Run) -> Result<(), CliError> {
    let spec = &run.scenario.diagnostics;
    let checks: Vec<String> = match &spec.checks {
        Some(c) => c.clone(),
        None => DIAGNOSTIC_CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = checks.iter().find(|c| !DIAGNOSTIC_CHECKS.contains(&c.as_str())) {
        return Err(CliError::Config(format!(
            "unknown check {bad:?}; available: {}",
            DIAGNOSTIC_CHECKS.join(", ")
        )));
    }
    let setup = run.setup()?;
    let n = require_n(run.piece_count().unwrap_or(DEFAULT_N))?;
    let samples = spec.samples.unwrap_or(DEFAULT_DIAGNOSTIC_SAMPLES);
    let k = setup
        .specimen
        .covered_stretches(&setup.program)
        .map_err(CliError::from_core)?;
    let core = |e| CliError::from_core(e);
    let u_star = solve(run, &setup, n)?.density;
    let f_n = uniform_interpolant(&setup.model, &k, n).map_err(core)?;
    let mut notes = Vec::new();
    let trial = if spec.inject_infeasible {
        // lowering u by s lowers every measured energy by s times the total volume
        let gap = with_reference(&setup, |r| {
            cost_j(&setup.specimen, &u_star, r, &setup.program).map_err(core)
        })?
        .min_gap;
        let shift = gap.max(0.0) / setup.specimen.total_volume() + INFEASIBLE_SHIFT;
        notes.push(format!("trial density is u_N* shifted down by {shift}, which makes it infeasible"));
        u_star.shifted(-shift)
    } else {
        u_star.clone()
    };

    let mut reports = Vec::new();
    for check in &checks {
        let report = match check.as_str() {
            "monotonicity" => {
                let (a, b) = (setup.program.delta_min, setup.program.delta_max);
                let quarter = 0.25 * (b - a);
                let small = BoundaryProgram::new(a + quarter, b - quarter, 2).map_err(core)?;
                with_reference(&setup, |r| {
                    monotonicity_check(&setup.specimen, &trial, r, &small, &setup.program).map_err(core)
                })?
            }
            "lipschitz_in_u" => {
                lipschitz_in_u_check(&setup.specimen, &trial, &f_n, &setup.program, samples).map_err(core)?
            }
            "separating_defect" => {
                let lambda = match spec.separating_lambda {
                    Some(l) => l,
                    None => length_ratio(&setup.specimen).ok().filter(|l| *l < 1.0).unwrap_or(0.5),
                };
                let p = spec.separating_power.unwrap_or(2.0);
                separating_decay_check(p, lambda, 1.0, 9).map_err(core)?
            }
            "density_bound" => {
                let spacings = spec
                    .spacings
                    .clone()
                    .unwrap_or_else(|| [4.0, 8.0, 16.0].iter().map(|d| k.width() / d).collect());
                density_bound_check_stretch(&setup.model, &k, &spacings, DENSITY_PROBES).map_err(core)?
            }
            _ => {
                let program = setup.program.with_samples(samples.max(2)).map_err(core)?;
                let lambdas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
                with_reference(&setup, |r| {
                    constraint_convexity_probe(&setup.specimen, &u_star, &f_n, r, &program, &lambdas).map_err(core)
                })?
            }
        };
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    write_json(
        &run.out,
        &DiagnoseDocument {
            schema_version: SCHEMA_VERSION,
            command: "diagnose",
            mode: setup.mode.as_str(),
            n,
            passed,
            notes: &notes,
            reports: &reports,
        },
    )?;
    println!("{:<22} {:<6} {:>9}", "check", "result", "witnesses");
    for r in &reports {
        println!(
            "{:<22} {:<6} {:>9}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.witnesses.len()
        );
    }
    if passed {
        Ok(())
    } else {
        let failing: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        Err(CliError::Failed(failing.join(", ")))
    }
}
