//! Executable checks of structural properties of the identification problem.
//!
//! Each check samples finitely many witnesses and reports them; a report
//! passes iff every witness satisfies its relation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::density::maxout::envelope_breakpoints;
use crate::density::{
    minors_lipschitz_bound, sup_gap_matrix, sup_gap_stretch, tangent_construction_matrix,
    tangent_construction_stretch, MatrixDomain, MaxoutDensity, StretchDomain,
};
use crate::error::{invalid, Error, Result};
use crate::identify::{cost_j, Reference, FEASIBILITY_TOLERANCE};
use crate::models::{DensityModel, PolyconvexModel};
use crate::numeric::{serde_extended_f64, uniform_grid};
use crate::specimen::{BoundaryProgram, Specimen};

/// Relative slack of the Lipschitz-in-u bound.
pub const LIPSCHITZ_TOLERANCE: f64 = 1e-12;
/// Relative slack of the cost ordering `J' ≤ J''`.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-12;
/// Allowed relative deviation of separating-defect ratios from `λ^{p−1}`.
pub const DECAY_RATIO_TOLERANCE: f64 = 0.05;

/// One sampled instance of a relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub input: String,
    pub relation: String,
    #[serde(with = "serde_extended_f64::vec")]
    pub measured: Vec<f64>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub name: String,
    pub passed: bool,
    pub witnesses: Vec<Witness>,
    pub tolerances: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    fn new(name: &str) -> Self {
        DiagnosticReport {
            name: name.to_string(),
            passed: true,
            witnesses: Vec::new(),
            tolerances: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn tolerance(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    fn witness(&mut self, input: String, relation: &str, measured: Vec<f64>, holds: bool) {
        self.passed &= holds;
        self.witnesses.push(Witness {
            input,
            relation: relation.to_string(),
            measured,
            holds,
        });
    }

    pub fn violations(&self) -> usize {
        self.witnesses.iter().filter(|w| !w.holds).count()
    }
}

/// `J' ≤ J''` for nested programs `M' ⊆ M''`, with +∞ above every real.
pub fn monotonicity_check(
    specimen: &Specimen,
    u: &MaxoutDensity,
    reference: Reference<'_>,
    small: &BoundaryProgram,
    large: &BoundaryProgram,
) -> Result<DiagnosticReport> {
    if !small.is_within(large) {
        return Err(invalid(format!(
            "programs are not nested: [{}, {}] vs [{}, {}]",
            small.delta_min, small.delta_max, large.delta_min, large.delta_max
        )));
    }
    let j_small = cost_j(specimen, u, reference, small)?.cost;
    let j_large = cost_j(specimen, u, reference, large)?.cost;
    let holds = j_small <= j_large + MONOTONICITY_TOLERANCE * (1.0 + j_large.abs())
        || (j_small.is_infinite() && j_large.is_infinite());
    let mut report = DiagnosticReport::new("monotonicity").tolerance("relative", MONOTONICITY_TOLERANCE);
    report.witness(
        format!(
            "M' = [{}, {}], M'' = [{}, {}]",
            small.delta_min, small.delta_max, large.delta_min, large.delta_max
        ),
        "J(M') <= J(M'')",
        vec![j_small, j_large],
        holds,
    );
    if j_large.is_infinite() {
        report.notes.push("trial density is infeasible on the larger program".into());
    }
    if j_small.is_infinite() {
        report.notes.push("trial density is infeasible on the smaller program".into());
    }
    Ok(report)
}

/// Exact `sup |u − u'|` over an interval: the difference is affine between
/// the union of both densities' breakpoints.
pub fn sup_distance(u: &MaxoutDensity, v: &MaxoutDensity, domain: &StretchDomain) -> Result<f64> {
    let (a, b) = (domain.xi_min(), domain.xi_max());
    let pu = stretch_pieces(u)?;
    let pv = stretch_pieces(v)?;
    let mut cuts = envelope_breakpoints(pu, a, b);
    cuts.extend(envelope_breakpoints(pv, a, b));
    let mut worst: f64 = 0.0;
    for x in cuts {
        worst = worst.max((u.value_stretch(x)? - v.value_stretch(x)?).abs());
    }
    Ok(worst)
}

fn stretch_pieces(u: &MaxoutDensity) -> Result<&[crate::density::AffinePiece1D]> {
    u.stretch_pieces().ok_or_else(|| Error::DimensionMismatch {
        expected: "stretch density".into(),
        found: format!("{:?}", u.kind()),
    })
}

/// `|E(u; δ) − E(u'; δ)| ≤ (Σ A_k L_k)·sup_K |u − u'|` at `samples` uniformly
/// spaced δ, K being the stretches covered by the program. The report keeps
/// the sample with the largest ratio to the bound.
pub fn lipschitz_in_u_check(
    specimen: &Specimen,
    u: &MaxoutDensity,
    u_prime: &MaxoutDensity,
    program: &BoundaryProgram,
    samples: usize,
) -> Result<DiagnosticReport> {
    let k = specimen.covered_stretches(program)?;
    let sup = sup_distance(u, u_prime, &k)?;
    let volume = specimen.total_volume();
    let bound = volume * sup;
    let mut report = DiagnosticReport::new("lipschitz_in_u").tolerance("relative", LIPSCHITZ_TOLERANCE);
    let mut worst: Option<(f64, f64, bool)> = None;
    let mut all_hold = true;
    for delta in uniform_grid(program.delta_min, program.delta_max, samples.max(2)) {
        let diff = (specimen.aggregate_energy(u, delta)? - specimen.aggregate_energy(u_prime, delta)?).abs();
        let holds = diff <= bound * (1.0 + LIPSCHITZ_TOLERANCE) + f64::MIN_POSITIVE;
        all_hold &= holds;
        let ratio = if bound > 0.0 { diff / bound } else { diff };
        match worst {
            Some((_, r, _)) if ratio <= r => {}
            _ => worst = Some((delta, ratio, holds)),
        }
    }
    let (delta, ratio, holds) = worst.expect("at least two samples");
    let diff = ratio * if bound > 0.0 { bound } else { 1.0 };
    report.witness(
        format!("delta = {delta}, sup_K|u - u'| = {sup}, volume = {volume}"),
        "|E(u) - E(u')| <= volume * sup_K|u - u'|",
        vec![diff, bound],
        holds && all_hold,
    );
    report.notes.push(format!("{} samples, worst ratio {ratio}", samples.max(2)));
    Ok(report)
}

/// `s_n = λ^{−n}·|d(1 + λⁿβ)|` for `n = 0..=iterations`.
pub fn separating_defect(d: impl Fn(f64) -> f64, lambda: f64, beta: f64, iterations: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("ratio lambda must lie in (0, 1), got {lambda}")));
    }
    Ok((0..=iterations)
        .map(|n| {
            let ln = lambda.powi(n as i32);
            d(1.0 + ln * beta).abs() / ln
        })
        .collect())
}

/// Length ratio `min L / max L` of a parallel-bar specimen.
pub fn length_ratio(specimen: &Specimen) -> Result<f64> {
    let lengths: Vec<f64> = specimen.members().iter().map(|m| m.length).collect();
    if lengths.len() < 2 {
        return Err(invalid("the length ratio needs at least two bars"));
    }
    let lo = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lengths.iter().copied().fold(0.0, f64::max);
    Ok(lo / hi)
}

/// Runs [`separating_defect`] on `d(ξ) = |ξ − 1|^p` and checks that
/// `s_{n+1}/s_n = λ^{p−1}` within 5% for `n ≥ 2`.
pub fn separating_decay_check(p: f64, lambda: f64, beta: f64, iterations: usize) -> Result<DiagnosticReport> {
    if !(p > 0.0) {
        return Err(invalid(format!("power p must be positive, got {p}")));
    }
    let s = separating_defect(|xi| (xi - 1.0).abs().powf(p), lambda, beta, iterations)?;
    let expected = lambda.powf(p - 1.0);
    let mut report = DiagnosticReport::new("separating_defect").tolerance("ratio_relative", DECAY_RATIO_TOLERANCE);
    for n in 2..iterations {
        let ratio = s[n + 1] / s[n];
        let holds = ((ratio - expected) / expected).abs() <= DECAY_RATIO_TOLERANCE;
        report.witness(
            format!("p = {p}, lambda = {lambda}, n = {n}"),
            "s_{n+1}/s_n = lambda^(p-1)",
            vec![ratio, expected],
            holds,
        );
    }
    report.notes.push(format!("s_n = {s:?}"));
    if p <= 1.0 {
        report.notes.push("no decay: the defect must vanish faster than linearly at 1".into());
    }
    Ok(report)
}

fn refinement_witnesses(report: &mut DiagnosticReport, spacings: &[f64], gaps: &[f64]) {
    for i in 1..spacings.len() {
        if spacings[i] < spacings[i - 1] {
            let holds = gaps[i] <= gaps[i - 1] + 1e-12 * (1.0 + gaps[i - 1].abs());
            report.witness(
                format!("delta_h {} -> {}", spacings[i - 1], spacings[i]),
                "error nonincreasing under refinement",
                vec![gaps[i - 1], gaps[i]],
                holds,
            );
        }
    }
}

/// For each spacing, `sup (w − u_h) ≤ 2ℓ·Lip(Minors|K)·δ_h` over at least
/// `probe_points` matrices of K.
pub fn density_bound_check(
    w: &PolyconvexModel,
    domain: &MatrixDomain,
    spacings: &[f64],
    probe_points: usize,
) -> Result<DiagnosticReport> {
    let lm = minors_lipschitz_bound(domain);
    let mut report = DiagnosticReport::new("density_bound")
        .tolerance("lipschitz_minors", lm)
        .tolerance("probe_points", probe_points as f64);
    let mut gaps = Vec::with_capacity(spacings.len());
    for &h in spacings {
        let u = tangent_construction_matrix(w, domain, h)?;
        let gap = sup_gap_matrix(w, &u, domain, probe_points)?;
        let bound = 2.0 * u.ell() * lm * h;
        report.witness(
            format!("{}, {domain}, delta_h = {h}, pieces = {}", w.name(), u.len()),
            "sup(w - u_h) <= 2 ell Lip(Minors) delta_h",
            vec![gap, bound],
            gap <= bound,
        );
        gaps.push(gap);
    }
    refinement_witnesses(&mut report, spacings, &gaps);
    Ok(report)
}

/// One-dimensional variant of [`density_bound_check`]; the minors map is the
/// identity, so the bound is `2ℓ·δ_h`.
pub fn density_bound_check_stretch(
    w: &DensityModel,
    domain: &StretchDomain,
    spacings: &[f64],
    probe_points: usize,
) -> Result<DiagnosticReport> {
    let mut report = DiagnosticReport::new("density_bound_1d").tolerance("probe_points", probe_points as f64);
    let mut gaps = Vec::with_capacity(spacings.len());
    for &h in spacings {
        let u = tangent_construction_stretch(w, domain, h)?;
        let gap = sup_gap_stretch(w, &u, domain, probe_points)?;
        let bound = 2.0 * u.ell() * h;
        report.witness(
            format!("{}, {domain}, delta_h = {h}, pieces = {}", w.name(), u.len()),
            "sup(w - u_h) <= 2 ell delta_h",
            vec![gap, bound],
            gap <= bound,
        );
        gaps.push(gap);
    }
    refinement_witnesses(&mut report, spacings, &gaps);
    Ok(report)
}

/// For each λ, checks that the pointwise combination `λu₁ + (1 − λ)u₂` keeps
/// the trial energy above the reference at the program's samples.
pub fn constraint_convexity_probe(
    specimen: &Specimen,
    u1: &MaxoutDensity,
    u2: &MaxoutDensity,
    reference: Reference<'_>,
    program: &BoundaryProgram,
    lambdas: &[f64],
) -> Result<DiagnosticReport> {
    for (name, u) in [("u1", u1), ("u2", u2)] {
        if !cost_j(specimen, u, reference, program)?.feasible {
            return Err(invalid(format!("{name} is infeasible on the program")));
        }
    }
    let points: Vec<(f64, f64)> = match reference {
        Reference::Continuum(e0) => program.samples().into_iter().map(|d| (d, e0.value(d))).collect(),
        Reference::Grid(samples) => samples
            .iter()
            .filter(|s| program.contains(s.delta))
            .map(|s| (s.delta, s.energy))
            .collect(),
    };
    let mut e1 = Vec::with_capacity(points.len());
    let mut e2 = Vec::with_capacity(points.len());
    for &(d, _) in &points {
        e1.push(specimen.aggregate_energy(u1, d)?);
        e2.push(specimen.aggregate_energy(u2, d)?);
    }
    let mut report = DiagnosticReport::new("constraint_convexity").tolerance("feasibility", FEASIBILITY_TOLERANCE);
    for &lambda in lambdas {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(format!("combination weight must lie in [0, 1], got {lambda}")));
        }
        let mut worst = (f64::NAN, f64::INFINITY, 0.0);
        for (i, &(d, e0)) in points.iter().enumerate() {
            let gap = lambda * e1[i] + (1.0 - lambda) * e2[i] - e0;
            let scaled = gap / (1.0 + e0.abs());
            if scaled < worst.1 {
                worst = (d, scaled, gap);
            }
        }
        report.witness(
            format!("lambda = {lambda}, worst delta = {}", worst.0),
            "E(lambda u1 + (1 - lambda) u2) >= E0",
            vec![worst.2],
            worst.1 >= -FEASIBILITY_TOLERANCE,
        );
    }
    report.notes.push(format!("{} samples per weight", points.len()));
    Ok(report)
}
