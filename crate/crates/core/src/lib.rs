//! Quadratic programs with linear complementarity constraints (LCQPs).
//!
//! ```text
//!     minimize    1/2 x' Q x + g' x
//!     subject to  A x >= b,   0 <= L x _|_ R x >= 0
//! ```
//!
//! The solver replaces the complementarity constraint by the penalty `rho * x'L'Rx`, increases
//! `rho` geometrically and solves each penalized problem by sequential convex programming: the
//! indefinite penalty is linearized, so every subproblem is a strictly convex QP with the same
//! Hessian `Q` and the same constraints. The QP subsolver therefore factorizes `Q` only once per
//! instance. Steps are globalized by minimizing the exact merit function along the step, which is
//! a one-dimensional quadratic and has a closed-form minimizer.
//!
//! Modules:
//! - [`problem`]: data model, validation, penalty/merit evaluation, JSON files.
//! - [`qpsolver`]: active-set QP subsolver with factorization reuse and hot starts.
//! - [`solver`]: penalty homotopy, inner SCP loop, step length, stationarity certificate.
//! - [`oracle`]: brute-force reference solvers used for verification.
//! - [`transcription`]: the switched-system optimal control benchmark as an LCQP.

pub mod error;
pub mod oracle;
pub mod problem;
pub mod qpsolver;
pub mod solver;
pub mod transcription;

pub use error::{Error, Result};
pub use problem::{LcqpProblem, PenaltyContext, ProblemData};
pub use qpsolver::{QpSolution, QpWorkspace, RowOrigin, StackedConstraints};
