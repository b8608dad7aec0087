//! The control space: minors of deformation gradients, maxout densities and
//! their lattice join, and the tangent-construction approximation scheme.

mod domain;
pub(crate) mod maxout;
mod minors;
mod tangent;

pub use domain::{Domain, DomainPolicy, MatrixDomain, Point, StretchDomain};
pub use maxout::{
    breakpoints, join, membership_check, AffinePiece1D, DensityKind, MaxoutDensity,
    MembershipReport, PolyaffinePiece,
};
pub use minors::{minors, minors_len, minors_lipschitz_bound, MinorsVector, SquareMatrix};
pub use tangent::{
    matrix_cover, matrix_probe_points, stretch_cover, sup_gap_matrix, sup_gap_stretch,
    tangent_construction_matrix, tangent_construction_stretch,
};
