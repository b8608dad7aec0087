//! Fixtures shared by the benchmarks.

use matlaw_core::{reduced_neo_hookean, BarMember, BoundaryProgram, DensityModel, Specimen, StretchDomain};

pub fn neo_hookean() -> DensityModel {
    reduced_neo_hookean(1.0).expect("valid shear modulus")
}

/// Two parallel bars of lengths 1 and 2 on the stretch range [0.5, 2].
pub fn two_bars() -> (Specimen, BoundaryProgram) {
    let specimen = Specimen::parallel_bars(vec![
        BarMember::new(1.0, 1.0).expect("valid bar"),
        BarMember::new(1.0, 2.0).expect("valid bar"),
    ])
    .expect("nonempty assembly");
    let domain = StretchDomain::new(0.5, 2.0).expect("valid domain");
    let program = specimen.admissible_program(&domain).expect("nonempty program");
    (specimen, program)
}

pub fn uniform_knots(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}
