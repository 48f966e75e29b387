use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Exponential mixing scales on the transformed coordinates.
    Laplace,
    /// All mixing scales held at one.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperUpdateKind {
    /// Closed-form inverse-gamma draws of the scales. Approximate; kept for comparison.
    InverseGamma,
    /// Univariate slice sampling of the exact conditional kernels.
    Slice,
}

/// Inverse-gamma prior on `sigma^2`; `shape = rate = 0` is the `1/sigma^2` prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for InverseGammaPrior {
    fn default() -> Self {
        InverseGammaPrior {
            shape: 0.0,
            rate: 0.0,
        }
    }
}

/// Parameters held constant instead of sampled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub sigma2: Option<f64>,
    pub lambda_t: Option<f64>,
    pub lambda_p: Option<f64>,
    pub eta: Option<Vec<bool>>,
    /// Keep the mixing scales at their initial value of one.
    pub omega: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub n_temperatures: usize,
    pub temperature_spacing: f64,
    pub prior_kind: PriorKind,
    pub hyper_update_kind: HyperUpdateKind,
    pub seed: u64,
    pub tau_fixed: Option<f64>,
    pub mh_target_accept: f64,
    /// Initial random-walk scale for tau.
    pub tau_proposal_sd: f64,
    pub sigma2_prior: InverseGammaPrior,
    pub fixed: FixedParams,
    /// Initial per-coordinate proposal scale of the generic sampler.
    pub mwg_proposal_sd: f64,
    /// Adapt generic-sampler proposal scales during burn-in.
    pub mwg_adapt: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 10_000,
            n_burnin: 2_000,
            thin: 1,
            n_temperatures: 5,
            temperature_spacing: 2.0,
            prior_kind: PriorKind::Laplace,
            hyper_update_kind: HyperUpdateKind::Slice,
            seed: 0,
            tau_fixed: None,
            mh_target_accept: 0.44,
            tau_proposal_sd: 0.5,
            sigma2_prior: InverseGammaPrior::default(),
            fixed: FixedParams::default(),
            mwg_proposal_sd: 0.1,
            mwg_adapt: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |m: String| Err(TrpError::InvalidInput(m));
        if self.n_burnin >= self.n_iter {
            return bad(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.n_burnin, self.n_iter
            ));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.n_temperatures == 0 {
            return bad("at least one temperature is required".into());
        }
        if !(self.temperature_spacing > 0.0) || !self.temperature_spacing.is_finite() {
            return bad("temperature spacing must be positive".into());
        }
        if !(self.mh_target_accept > 0.0 && self.mh_target_accept < 1.0) {
            return bad("target acceptance must lie in (0, 1)".into());
        }
        if !(self.tau_proposal_sd > 0.0) || !(self.mwg_proposal_sd > 0.0) {
            return bad("proposal scales must be positive".into());
        }
        if self.sigma2_prior.shape < 0.0 || self.sigma2_prior.rate < 0.0 {
            return bad("sigma^2 prior parameters must be nonnegative".into());
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0) || !x.is_finite() => Err(TrpError::InvalidInput(format!(
                "{name} must be positive, got {x}"
            ))),
            _ => Ok(()),
        };
        positive("fixed tau", self.tau_fixed)?;
        positive("fixed sigma^2", self.fixed.sigma2)?;
        positive("fixed lambda_p", self.fixed.lambda_p)?;
        if let Some(lt) = self.fixed.lambda_t {
            if !(lt >= 0.0) || !lt.is_finite() {
                return bad(format!("fixed lambda_t must be nonnegative, got {lt}"));
            }
        }
        if let Some(eta) = &self.fixed.eta {
            if eta.len() != k {
                return bad(format!("fixed eta has length {}, expected {k}", eta.len()));
            }
        }
        Ok(())
    }

    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }
}
