//! Identification of hyperelastic energy densities from boundary energy
//! measurements.
//!
//! Trial densities are maxout functions: pointwise maxima of finitely many
//! affine functions of the stretch (1D) or of the minors of the deformation
//! gradient (2D/3D). The identification problem minimizes the worst excess
//! of the trial energy over the measured energy across a boundary program,
//! subject to the trial energy never falling below the measurement.
//!
//! Module map:
//!
//! * [`density`]: minors, maxout densities, lattice join, tangent construction.
//! * [`models`]: ground-truth densities (quadratic, Neo-Hookean, custom).
//! * [`specimen`]: bar assemblies and affine cells, measured and trial energies.
//! * [`identify`]: chord excess, equi-error knot placement, cost, convergence.
//! * [`diagnostics`]: executable checks of the structural properties.

// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod diagnostics;
pub mod error;
pub mod identify;
pub mod models;
pub mod numeric;
pub mod profile;
pub mod specimen;

pub use density::{
    breakpoints, join, membership_check, minors, minors_lipschitz_bound,
    tangent_construction_matrix, tangent_construction_stretch, AffinePiece1D, DensityKind,
    Domain, DomainPolicy, MatrixDomain, MaxoutDensity, MembershipReport, MinorsVector, Point,
    PolyaffinePiece, SquareMatrix, StretchDomain,
};
pub use diagnostics::{DiagnosticReport, Witness};
pub use error::{Error, Result};
pub use identify::{
    chord_error, convergence_study, cost_j, equalize_knots, knots_to_density,
    minimizing_sequence_parallel, uniform_interpolant, ChordExcess, ConvergenceRecord,
    CostEvaluation, EqualizeOptions, IdentificationResult, KnotSpace, Reference,
};
pub use models::{
    custom_density, neo_hookean_principal, quadratic_density, reduced_neo_hookean,
    uniaxial_reduction, CustomDensity, DensityModel, PolyconvexModel, PrincipalStretchModel,
};
pub use profile::ConvexProfile;
pub use specimen::{BarMember, BoundaryProgram, EnergyMeasurement, MeasuredEnergy, Specimen};
