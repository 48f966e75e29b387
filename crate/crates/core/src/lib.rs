//! Bayesian transfer learning for linear regression with the total risk prior.
//!
//! The prior couples a target coefficient vector to the regularized
//! total-risk minimizer of the source coefficients. This crate provides the
//! structured linear algebra, the transfer operator, a Gibbs sampler with
//! tempered dataset-inclusion updates, MAP solvers, frequentist baselines and
//! a small benchmark harness.

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod linalg;
pub mod map;
pub mod transfer;

pub use error::{Result, TrpError};
