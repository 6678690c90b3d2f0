//! Discrete-time adaptive control with directional-forgetting concurrent learning.
//!
//! The crate is organised around the closed loop of a structured SISO plant
//!
//! ```text
//! y(k+1) = θᵀφ(k) + w(k),   φ(k) = [φ_f(k)ᵀ, φ_g(k)·u(k)]ᵀ
//! ```
//!
//! * [`plant`]: regressor construction, the true plant and disturbance generators.
//! * [`estimator`]: the normalized concurrent-learning update law and the rank-gated
//!   information matrix / auxiliary vector recursion with directional forgetting.
//! * [`baselines`]: stack-manager and condition-number data selection for comparison runs.
//! * [`controller`]: reference model, certainty-equivalence control law and the ideal
//!   (oracle) controller.
//! * [`analysis`]: Lyapunov quantities, disturbance-term bounds and stability constants,
//!   evaluated per step on simulation snapshots.
//! * [`harness`]: scenario configuration, the simulation driver, comparison runs and
//!   CSV/SVG export.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod plant;

pub use error::{Error, Result};
