//! Diagonal step-size planning for gradient descent.
//!
//! The [`planner`] learns a per-component step-size from pairs of
//! gradient-descent iterates `K` steps apart and uses it to project the iterate
//! ahead. [`baselines`] holds the classical step-size methods it is compared
//! against, [`problems`] the test objectives, [`theory`] closed-form optimal
//! step-sizes on quadratics, and [`harness`] the experiment runner behind the
//! command-line tool.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod objective;
pub mod planner;
pub mod presets;
pub mod problems;
pub mod report;
pub mod theory;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use objective::{finite_diff_grad, EvalBudget, Objective, Problem};
pub use trace::{Trace, TraceRecord, TraceStatus};
pub use vector::{axpy, hadamard, ParamVector};
