//! Small dense semidefinite-programming solver.
//!
//! Problems are block-diagonal standard form ([`ConicProblem`]); [`solve`]
//! runs a homogeneous self-dual interior-point method and returns either an
//! optimal primal-dual pair or an infeasibility certificate, which
//! [`check_certificate`] re-verifies from scratch.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
mod error;
pub mod linalg;
pub mod presolve;
pub mod problem;
pub mod solver;

pub use certificate::{check_certificate, CertificateReport, Check};
pub use error::ConicError;
pub use problem::{ConicProblem, Constraint, ProblemDump, Term, Triplet};
pub use solver::{solve, ConicSolution, Residuals, SolveStatus, SolverSettings};
