//! Generic Metropolis-within-Gibbs sampler that evaluates the prior through
//! the transfer operator itself, so any regularizer with a solver can be used.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};
use crate::gibbs::config::{PriorKind, SamplerConfig};
use crate::gibbs::dist::std_normal;
use crate::gibbs::draws::{ParamLayout, PosteriorDraws};
use crate::gibbs::slice::slice_sample_positive;
use crate::gibbs::state::ModelState;
use crate::gibbs::tempering::SwapStats;
use crate::transfer::{build_transfer_matrix, transfer_operator_l1, TransferProblem};

/// Coordinate count above which the per-coordinate scan gets slow.
pub const MWG_SIZE_WARNING: usize = 200;

/// Regularizer of the transfer operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferPenalty {
    L1,
    L2,
}

enum Operator {
    Linear(DMatrix<f64>),
    L1 { eta: Vec<bool>, tau: f64 },
}

impl Operator {
    fn apply(&self, problem: &TransferProblem, beta_s: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Operator::Linear(t) => Ok(t * beta_s),
            Operator::L1 { eta, tau } => transfer_operator_l1(problem, beta_s, eta, *tau),
        }
    }
}

struct Target<'a> {
    problem: &'a TransferProblem,
    op: Operator,
    kind: PriorKind,
    p: usize,
}

impl Target<'_> {
    /// `sum |d|` for the Laplace form, `sum d^2` for the Gaussian form.
    fn distance(&self, beta_a: &DVector<f64>) -> Result<f64> {
        let p = self.p;
        let beta_s = beta_a.rows(p, beta_a.len() - p).into_owned();
        let d = beta_a.rows(0, p) - self.op.apply(self.problem, &beta_s)?;
        Ok(match self.kind {
            PriorKind::Laplace => d.iter().map(|v| v.abs()).sum(),
            PriorKind::Gaussian => d.norm_squared(),
        })
    }

    fn log_prior(&self, dist: f64, sigma2: f64, lambda_t: f64) -> f64 {
        match self.kind {
            PriorKind::Laplace => -lambda_t * dist / sigma2.sqrt(),
            PriorKind::Gaussian => -lambda_t * lambda_t * dist / (2.0 * sigma2),
        }
    }
}

/// Per-coordinate random-walk Metropolis on `beta_A` with slice updates of
/// `sigma^2` and `lambda_t`. `eta` and `tau` stay at their configured or
/// initial values; fields the sampler does not update keep their initial
/// values in the output.
pub fn run_generic_mwg(
    problem: &TransferProblem,
    penalty: TransferPenalty,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    config.validate(problem.k())?;
    let (p, k) = (problem.p(), problem.k());
    let dim = (k + 1) * p;
    let mut state = ModelState::initial(problem, config)?;
    let op = match penalty {
        TransferPenalty::L2 => {
            Operator::Linear(build_transfer_matrix(problem, &state.eta, state.tau)?.t)
        }
        TransferPenalty::L1 => {
            if !(state.tau > 0.0) {
                return Err(TrpError::InvalidInput(
                    "the l1 operator needs tau > 0".into(),
                ));
            }
            Operator::L1 {
                eta: state.eta.clone(),
                tau: state.tau,
            }
        }
    };
    let target = Target {
        problem,
        op,
        kind: config.prior_kind,
        p,
    };

    let mut rng_beta = ChaCha8Rng::seed_from_u64(config.seed);
    rng_beta.set_stream(101);
    let mut rng_sigma = ChaCha8Rng::seed_from_u64(config.seed);
    rng_sigma.set_stream(102);
    let mut rng_lambda = ChaCha8Rng::seed_from_u64(config.seed);
    rng_lambda.set_stream(103);

    let grams: Vec<DMatrix<f64>> = problem.datasets().map(|d| d.gram().clone()).collect();
    let xtys: Vec<DVector<f64>> = problem.datasets().map(|d| d.xty().clone()).collect();
    let mut g_beta: Vec<DVector<f64>> = (0..=k).map(|i| &grams[i] * state.beta(i)).collect();
    let mut rss = problem.residual_sq(&state.beta_a);
    let mut dist = target.distance(&state.beta_a)?;

    let mut log_sd = vec![config.mwg_proposal_sd.ln(); dim];
    let (mut proposed, mut accepted) = (0u64, 0u64);
    let layout = ParamLayout::new(p, k);
    let mut rows = Vec::with_capacity(config.n_retained());
    let n_obs = problem.n_total() as f64;
    let prior = config.sigma2_prior;

    for it in 0..config.n_iter {
        let step = (|| -> Result<()> {
            let adapt = if config.mwg_adapt && it < config.n_burnin {
                1.0 / ((it + 1) as f64).powf(0.6)
            } else {
                0.0
            };
            for c in 0..dim {
                let (blk, j) = (c / p, c % p);
                let delta = log_sd[c].exp() * std_normal(&mut rng_beta);
                let u: f64 = rng_beta.random();
                let g = &grams[blk];
                let d_rss =
                    -2.0 * delta * (xtys[blk][j] - g_beta[blk][j]) + delta * delta * g[(j, j)];
                let mut cand = state.beta_a.clone();
                cand[c] += delta;
                let cand_dist = target.distance(&cand)?;
                let log_ratio = -d_rss / (2.0 * state.sigma2)
                    + target.log_prior(cand_dist, state.sigma2, state.lambda_t)
                    - target.log_prior(dist, state.sigma2, state.lambda_t);
                let ok = u.ln() < log_ratio;
                if it >= config.n_burnin {
                    proposed += 1;
                }
                if ok {
                    state.beta_a = cand;
                    g_beta[blk].axpy(delta, &g.column(j), 1.0);
                    rss = (rss + d_rss).max(0.0);
                    dist = cand_dist;
                    if it >= config.n_burnin {
                        accepted += 1;
                    }
                }
                if adapt > 0.0 {
                    log_sd[c] += adapt * (if ok { 1.0 } else { 0.0 } - config.mh_target_accept);
                }
            }
            // Refresh against drift of the incremental residual update.
            rss = problem.residual_sq(&state.beta_a);

            if config.fixed.sigma2.is_none() {
                let lt = state.lambda_t;
                let kernel = |s2: f64| {
                    -(prior.shape + 1.0 + 0.5 * (n_obs + p as f64)) * s2.ln()
                        - (prior.rate + 0.5 * rss) / s2
                        + target.log_prior(dist, s2, lt)
                };
                state.sigma2 = slice_sample_positive(state.sigma2, kernel, &mut rng_sigma)?;
            }
            if config.fixed.lambda_t.is_none() {
                let s2 = state.sigma2;
                let kernel = |lt: f64| {
                    p as f64 * lt.ln() + target.log_prior(dist, s2, lt) - (1.0 + lt * lt).ln()
                };
                state.lambda_t = slice_sample_positive(state.lambda_t, kernel, &mut rng_lambda)?;
            }
            Ok(())
        })();
        step.map_err(|e| e.at_iteration(it))?;
        if it >= config.n_burnin && (it - config.n_burnin) % config.thin == config.thin - 1 {
            rows.push(layout.flatten(&state));
        }
    }

    let mut acc = BTreeMap::new();
    acc.insert(
        "beta".to_string(),
        if proposed == 0 {
            0.0
        } else {
            accepted as f64 / proposed as f64
        },
    );
    Ok(PosteriorDraws::new(
        layout,
        &rows,
        config.clone(),
        acc,
        SwapStats::new(1),
    ))
}
