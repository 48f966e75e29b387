//! Gibbs sampling for the scale-mixture total risk prior.
//!
//! `beta_A` is drawn jointly through the low-rank precision factorization,
//! the mixing scales by Wald draws, the inclusion vector with parallel
//! tempering and `tau` by adaptive random-walk Metropolis.

pub mod chain;
pub mod conditionals;
pub mod config;
pub mod dist;
pub mod draws;
pub mod mwg;
pub mod predict;
pub mod slice;
pub mod state;
pub mod tempering;

pub use chain::{run_chain, GibbsChain};
pub use conditionals::{
    eta_log_density, eta_log_odds, mh_tau, sample_beta_a, sample_lambda_p, sample_lambda_t,
    sample_omega, sample_rho, sample_scale_hyperparams, sample_sigma2, sigma2_shape_rate,
    TauSampler, TrpTerms,
};
pub use config::{FixedParams, HyperUpdateKind, InverseGammaPrior, PriorKind, SamplerConfig};
pub use draws::{ParamLayout, PosteriorDraws};
pub use mwg::{run_generic_mwg, TransferPenalty};
pub use predict::{posterior_predict, posterior_predict_level, Prediction};
pub use state::ModelState;
pub use tempering::{inverse_temperatures, sample_eta_tempered, SwapStats};
