//! Projected gradient descent for generalized linear model losses under
//! combinatorial structured-sparsity constraints.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] - sparsity models generated by a family of supports, the
//!   family-union expansion and membership tests.
//! * [`projection`] - exact Euclidean projection onto a sparsity model
//!   intersected with a norm ball, plus an enumeration oracle.
//! * [`glm`] - log-partition families, empirical loss, gradient and
//!   restricted Hessians.
//! * [`smrh`] - restricted Hessian constants, step sizes and contraction
//!   factors, and the Jacobi eigensolver behind them.
//! * [`solver`] - the projected gradient iteration with per-step contraction
//!   auditing.
//! * [`synth`] - synthetic parameters, datasets and the empirical error
//!   decomposition.
//! * [`io`] - file formats shared by the command-line front end.

pub mod error;
pub mod glm;
pub mod io;
pub mod model;
pub mod projection;
pub mod rng;
pub mod smrh;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use glm::{Dataset, GlmFamily};
pub use model::{ModelKind, SparsityModel, Support};
pub use projection::{brute_force_project, project_bounded, project_unbounded, ProjectionResult};
pub use smrh::{analytic_smrh_bounds, contraction_gamma, step_size_optimal, SmrhEstimate};
pub use solver::{fit, SolverConfig, SolverTrace, StepPolicy};

/// Library version embedded in every JSON report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
