//! Newton-Raphson solving with first-iteration convergence diagnostics.
//!
//! Given a poor initial guess, one Newton step is enough to compute indicators
//! that point at the guess values responsible for a failing solve:
//!
//! * `α_i`, the normalized higher-order Taylor remainder of equation `i`;
//! * `Γ_ijk`, the normalized Hessian contribution of the pair `(j, k)`;
//! * `σ_jj`, the diagonal of the sensitivity `∂x1/∂x0`.
//!
//! The [`problems`] module ships three benchmark systems (a heat exchanger, a
//! diode circuit and an AC power grid) with named initial-guess presets.

// `!(a <= b)` is used deliberately so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod linops;
pub mod model;
pub mod problems;
pub mod solver;

pub use diagnostics::{diagnose, DiagnosticReport};
pub use linops::Mat;
pub use model::{EvalFailure, SystemModel};
pub use solver::{newton_solve, SolveOptions, SolveReport, SolveStatus};
