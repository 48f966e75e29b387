use nalgebra::DVector;

use crate::baselines::ridge;
use crate::error::{Result, TrpError};
use crate::gibbs::config::SamplerConfig;
use crate::linalg::stack_vectors;
use crate::transfer::TransferProblem;

/// One point of the sampler's state space.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    /// `(beta_0, beta_1, ..., beta_K)` stacked.
    pub beta_a: DVector<f64>,
    pub sigma2: f64,
    pub omega: DVector<f64>,
    pub eta: Vec<bool>,
    pub rho: f64,
    pub lambda_t: f64,
    pub lambda_p: f64,
    pub tau: f64,
    pub a_t: f64,
    pub a_p: f64,
}

impl ModelState {
    /// Ridge fits per dataset, pooled residual variance, unit scales.
    pub fn initial(problem: &TransferProblem, config: &SamplerConfig) -> Result<Self> {
        let (p, k) = (problem.p(), problem.k());
        let fits = problem
            .datasets()
            .map(|d| ridge(d, 1.0))
            .collect::<Result<Vec<_>>>()?;
        let beta_a = stack_vectors(&fits);
        let rss = problem.residual_sq(&beta_a);
        let n = problem.n_total();
        let dof = n.saturating_sub((k + 1) * p).max(1);
        let scale = problem
            .datasets()
            .flat_map(|d| d.y().iter().copied())
            .map(|v| v * v)
            .sum::<f64>()
            / n as f64;
        let sigma2 = (rss / dof as f64)
            .max(1e-10 * scale.max(1e-300))
            .max(1e-300);
        let fixed = &config.fixed;
        Ok(ModelState {
            beta_a,
            sigma2: fixed.sigma2.unwrap_or(sigma2),
            omega: DVector::from_element(p, 1.0),
            eta: fixed.eta.clone().unwrap_or_else(|| vec![true; k]),
            rho: 0.5,
            lambda_t: fixed.lambda_t.unwrap_or(1.0),
            lambda_p: fixed.lambda_p.unwrap_or(1.0),
            tau: config.tau_fixed.unwrap_or(1.0),
            a_t: 1.0,
            a_p: 1.0,
        })
    }

    pub fn p(&self) -> usize {
        self.omega.len()
    }

    pub fn k(&self) -> usize {
        self.eta.len()
    }

    pub fn beta(&self, k: usize) -> DVector<f64> {
        let p = self.p();
        self.beta_a.rows(k * p, p).into_owned()
    }

    pub fn beta_s(&self) -> DVector<f64> {
        let p = self.p();
        self.beta_a.rows(p, self.k() * p).into_owned()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(TrpError::Degenerate(format!(
                "state invariant violated: {m}"
            )))
        };
        if self.beta_a.iter().any(|v| !v.is_finite()) {
            return bad("beta_A not finite");
        }
        if self.omega.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return bad("omega not positive and finite");
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("tau", self.tau),
            ("lambda_p", self.lambda_p),
            ("a_t", self.a_t),
            ("a_p", self.a_p),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(name);
            }
        }
        if !(self.lambda_t >= 0.0) || !self.lambda_t.is_finite() {
            return bad("lambda_t");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho outside [0, 1]");
        }
        Ok(())
    }
}
