//! Temporal alignment of ordered video-interval features with ordered
//! sentence features.
//!
//! The integer assignment problem is relaxed to a convex quadratic over
//! the hull of monotone alignment paths and solved with Frank-Wolfe, using
//! dynamic programming as the linear oracle. A closed-form ridge model is
//! learned jointly and used to round the relaxed solution.

pub mod commands;
pub mod discriminative;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod manifest;
pub mod matrix;
pub mod pipeline;
pub mod polytope;
pub mod priors;
pub mod rounding;
pub mod solver;
pub mod supervision;
pub mod synth;

pub use error::{AlignError, Result};
pub use matrix::FeatureMatrix;
pub use pipeline::{align, evaluate, Dataset, Hyperparameters};
pub use polytope::{AlignmentPath, CellMask, RelaxedAssignment};
pub use rounding::Rounding;
pub use solver::{solve, ProblemInstance, SolveOptions, SolveResult};
pub use supervision::SupervisionMode;
