//! The minimax identification problem for bar specimens.
//!
//! Feasible trial densities must keep the trial energy above the measured
//! energy on the whole boundary program; among those, max-of-chord majorants
//! with equalized interval errors are optimal for a single bar.

mod chord;
mod cost;
mod equalize;
mod study;

pub use chord::{chord_error, ChordExcess};
pub use cost::{cost_j, CostEvaluation, Reference, FEASIBILITY_TOLERANCE};
pub use equalize::{equalize_knots, knots_to_density, EqualizeOptions, IdentificationResult, KnotSpace};
pub use study::{
    check_chain, convergence_records, convergence_records_on, convergence_study, minimizing_sequence_parallel, uniform_interpolant,
    ConvergenceRecord, CHAIN_TOLERANCE,
};
