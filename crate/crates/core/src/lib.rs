//! Sparse inverse-covariance estimation by penalized maximum likelihood.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bcd;
pub mod binary;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod nesterov;
pub mod penalty;
pub mod solver;
pub mod synthetic;

pub use baselines::{
    classification_report, neighborhood_select, pattern_of, threshold_inverse, ClassificationReport, EdgeRule,
    SparsityPattern,
};
pub use bcd::{solve_bcd, BcdOptions, BcdSolver};
pub use binary::{
    binary_problem, exact_log_partition, relaxed_log_partition_bound, solve_binary, BinaryEstimate, LogisticParams,
};
pub use error::{CovselError, Result};
pub use model::{
    dual_objective, duality_gap, eigenvalue_bounds, kkt_residual, primal_objective, second_moment, DataKind, Estimate,
    Problem, SampleMatrix, SecondMoment, SolverKind,
};
pub use nesterov::{solve_nesterov, NesterovOptions};
pub use penalty::{
    binary_lambda, chi2_quantile_1dof, gaussian_lambda, student_t_quantile, PenaltyChoice, PenaltyFamily,
};
pub use solver::Solver;
