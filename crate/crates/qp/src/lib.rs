//! Sparse convex quadratic programming.
//!
//! The solver works on [`QuadraticProgram`]: a PSD quadratic objective with
//! variable bounds, linear equalities and `≤` inequalities. Linear systems are
//! solved with an envelope LDLᵀ factorization of the quasi-definite KKT matrix,
//! under a bandwidth-reducing ordering; problems whose constraint graph is
//! chain-like (time-stepped models) factor in near-linear time.

pub mod ipm;
pub mod ldl;
pub mod ordering;
pub mod osqp;
pub mod problem;
pub mod scaling;
pub mod sparse;

pub use ipm::{solve_ipm, IpmSettings, IpmSolver};
pub use osqp::{solve, Settings, SolveReport, Solver, SolverError, Status};
pub use problem::{ProblemError, QpBuilder, QuadraticProgram};
pub use sparse::CscMatrix;
