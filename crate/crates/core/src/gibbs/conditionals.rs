//! Full conditionals of the scale-mixture total risk prior model.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, TrpError};
use crate::gibbs::config::{HyperUpdateKind, InverseGammaPrior, PriorKind, SamplerConfig};
use crate::gibbs::dist::{beta, inv_gamma, std_normal, std_normal_vec, wald};
use crate::gibbs::slice::slice_sample_positive;
use crate::gibbs::state::ModelState;
use crate::linalg::{
    block_diag, inverse_spd, symmetrize, BlockCholesky, RowSpace, StructuredPrecision,
};
use crate::transfer::{build_transfer_matrix, TransferMatrix, TransferProblem};

const DIFF_FLOOR: f64 = 1e-300;
const WALD_MEAN_CAP: f64 = 1e300;
const INV_OMEGA_MIN: f64 = 1e-12;
const INV_OMEGA_MAX: f64 = 1e12;
const RHO_CLAMP: f64 = 1e-12;

/// Quantities of the prior on `beta_A` that depend on `(eta, tau)`.
#[derive(Clone, Debug)]
pub struct TrpTerms {
    pub tm: TransferMatrix,
    /// `B beta_A`.
    pub b_beta: DVector<f64>,
    /// `||Omega^{-1/2} B beta_A||^2`.
    pub quad_omega: f64,
    /// `||P_{B-perp} beta_A||^2`.
    pub kernel_sq: f64,
    /// `log |B^T Omega^{-1} B|^dagger`.
    pub log_pdet: f64,
}

impl TrpTerms {
    pub fn new(
        problem: &TransferProblem,
        beta_a: &DVector<f64>,
        omega: &DVector<f64>,
        eta: &[bool],
        tau: f64,
    ) -> Result<Self> {
        let tm = build_transfer_matrix(problem, eta, tau)?;
        let rs = RowSpace::new(&tm.b)?;
        let omega_inv = omega.map(|w| 1.0 / w);
        let log_pdet = rs.pseudo_det_log(&omega_inv)?;
        let b_beta = tm.apply_b(beta_a);
        let quad_omega = b_beta
            .iter()
            .zip(omega.iter())
            .map(|(v, w)| v * v / w)
            .sum();
        let kernel_sq = rs.kernel_project(beta_a)?.norm_squared();
        Ok(TrpTerms {
            tm,
            b_beta,
            quad_omega,
            kernel_sq,
            log_pdet,
        })
    }

    pub fn from_state(problem: &TransferProblem, state: &ModelState) -> Result<Self> {
        Self::new(problem, &state.beta_a, &state.omega, &state.eta, state.tau)
    }

    /// `q(B) = ||Omega^{-1/2} B beta||^2 + lambda_p^2 ||P_{B-perp} beta||^2`.
    pub fn q(&self, lambda_p: f64) -> f64 {
        self.quad_omega + lambda_p * lambda_p * self.kernel_sq
    }

    /// Log prior density of `beta_A` up to terms free of `(eta, tau)`.
    pub fn log_prior_part(&self, sigma2: f64, lambda_p: f64) -> f64 {
        0.5 * self.log_pdet - self.q(lambda_p) / (2.0 * sigma2)
    }
}

/// `beta_A | rest ~ N(Sigma X_A^T y_A, sigma^2 Sigma)` with
/// `Sigma^{-1} = X_A^T X_A + B^T Omega^{-1} B + lambda_p^2 P_{B-perp}`.
pub fn sample_beta_a<R: Rng + ?Sized>(
    state: &ModelState,
    problem: &TransferProblem,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (p, k) = (problem.p(), problem.k());
    let n = (k + 1) * p;
    let xi1 = std_normal_vec(p, rng);
    let xi2 = std_normal_vec(n, rng);
    let tm = build_transfer_matrix(problem, &state.eta, state.tau)?;
    let lp2 = state.lambda_p * state.lambda_p;
    let xty = problem.stacked_xty();
    let sigma = state.sigma2.sqrt();

    let base = BlockCholesky::from_grams(problem.datasets().map(|d| d.gram()), lp2)?;
    let bbt = &tm.b * tm.b.transpose();
    let bbt_inv = inverse_spd(&bbt, "B B^T")?;
    let core = symmetrize(&(DMatrix::from_diagonal(&state.omega.map(|w| 1.0 / w)) - bbt_inv * lp2));
    let sp = StructuredPrecision::new(base, tm.b.clone(), core)?;
    match sp.factor() {
        Ok(f) => {
            let mean = f.solve(&xty);
            Ok(mean + f.sample(&xi1, &xi2)? * sigma)
        }
        Err(TrpError::NotPositiveDefinite(_)) => {
            dense_beta_draw(state, problem, &tm, &xty, &xi2, sigma)
        }
        Err(e) => Err(e),
    }
}

/// Direct factorization of the assembled precision. Used only when the
/// low-rank path loses positive definiteness to cancellation.
fn dense_beta_draw(
    state: &ModelState,
    problem: &TransferProblem,
    tm: &TransferMatrix,
    xty: &DVector<f64>,
    xi: &DVector<f64>,
    sigma: f64,
) -> Result<DVector<f64>> {
    let lp2 = state.lambda_p * state.lambda_p;
    let grams: Vec<DMatrix<f64>> = problem.datasets().map(|d| d.gram().clone()).collect();
    let n = xty.len();
    let b = &tm.b;
    let bbt_inv = inverse_spd(&(b * b.transpose()), "B B^T")?;
    let proj_row = b.transpose() * bbt_inv * b;
    let omega_inv = DMatrix::from_diagonal(&state.omega.map(|w| 1.0 / w));
    let prec = block_diag(&grams)
        + b.transpose() * omega_inv * b
        + (DMatrix::identity(n, n) - proj_row) * lp2;
    let chol = Cholesky::new(symmetrize(&prec))
        .ok_or_else(|| TrpError::NotPositiveDefinite("conditional precision of beta_A".into()))?;
    let mean = chol.solve(xty);
    let mut z = xi.clone();
    chol.l().tr_solve_lower_triangular_mut(&mut z);
    Ok(mean + z * sigma)
}

/// Inverse-gamma conditional of `sigma^2`.
pub fn sample_sigma2<R: Rng + ?Sized>(
    state: &ModelState,
    problem: &TransferProblem,
    prior: &InverseGammaPrior,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = sigma2_shape_rate(state, problem, prior)?;
    inv_gamma(shape, rate, rng)
}

pub fn sigma2_shape_rate(
    state: &ModelState,
    problem: &TransferProblem,
    prior: &InverseGammaPrior,
) -> Result<(f64, f64)> {
    let terms = TrpTerms::from_state(problem, state)?;
    let rss = problem.residual_sq(&state.beta_a);
    let dims = problem.n_total() + (problem.k() + 1) * problem.p();
    let shape = prior.shape + 0.5 * dims as f64;
    let rate = prior.rate + 0.5 * (rss + terms.q(state.lambda_p));
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(TrpError::Degenerate(format!(
            "sigma^2 conditional rate is {rate}; residuals and coefficients are all zero"
        )));
    }
    Ok((shape, rate))
}

/// `1/omega_p ~ Wald(sigma lambda_t / |(B beta)_p|, lambda_t^2)`.
pub fn sample_omega<R: Rng + ?Sized>(
    state: &ModelState,
    problem: &TransferProblem,
    prior_kind: PriorKind,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let p = problem.p();
    if prior_kind == PriorKind::Gaussian {
        return Ok(DVector::from_element(p, 1.0));
    }
    if !(state.lambda_t > 0.0) {
        return Err(TrpError::InvalidInput(
            "the Laplace prior needs a positive lambda_t".into(),
        ));
    }
    let tm = build_transfer_matrix(problem, &state.eta, state.tau)?;
    let b_beta = tm.apply_b(&state.beta_a);
    let sigma = state.sigma2.sqrt();
    let shape = state.lambda_t * state.lambda_t;
    let mut omega = DVector::zeros(p);
    for i in 0..p {
        let d = b_beta[i].abs().max(DIFF_FLOOR);
        let mut mean = sigma * state.lambda_t / d;
        if !mean.is_finite() || mean > WALD_MEAN_CAP {
            mean = WALD_MEAN_CAP;
        }
        let inv = wald(mean, shape, rng);
        let inv = if inv.is_nan() { INV_OMEGA_MAX } else { inv };
        omega[i] = 1.0 / inv.clamp(INV_OMEGA_MIN, INV_OMEGA_MAX);
    }
    Ok(omega)
}

/// `a ~ InvGamma(1, 1 + lambda^2)`.
pub fn sample_aux<R: Rng + ?Sized>(lambda_sq: f64, rng: &mut R) -> Result<f64> {
    inv_gamma(1.0, 1.0 + lambda_sq, rng)
}

/// Log kernel of `lambda_t^2` under the half-Cauchy hierarchy.
pub fn lambda_t_sq_log_kernel(x: f64, state: &ModelState, prior_kind: PriorKind) -> f64 {
    let prior = -0.5 * x.ln() - x / state.a_t;
    match prior_kind {
        PriorKind::Laplace => {
            let p = state.p() as f64;
            prior + p * x.ln() - 0.5 * x * state.omega.sum()
        }
        PriorKind::Gaussian => prior,
    }
}

/// Log kernel of `lambda_p^2` given `||P_{B-perp} beta_A||^2`.
pub fn lambda_p_sq_log_kernel(x: f64, state: &ModelState, kernel_sq: f64) -> f64 {
    let kp = (state.k() * state.p()) as f64;
    -0.5 * x.ln() - x / state.a_p + 0.5 * kp * x.ln() - 0.5 * x * kernel_sq / state.sigma2
}

/// Returns `(lambda_t, a_t)`.
pub fn sample_lambda_t<R: Rng + ?Sized>(
    state: &ModelState,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let x0 = state.lambda_t * state.lambda_t;
    let x = match config.hyper_update_kind {
        HyperUpdateKind::Slice => slice_sample_positive(
            x0,
            |x| lambda_t_sq_log_kernel(x, state, config.prior_kind),
            rng,
        )?,
        HyperUpdateKind::InverseGamma => {
            let p = state.p() as f64;
            inv_gamma(p + 0.5, 1.0 / state.a_t + 0.5 * state.omega.sum(), rng)?
        }
    };
    let a_t = sample_aux(x, rng)?;
    Ok((x.sqrt(), a_t))
}

/// Returns `(lambda_p, a_p)`.
pub fn sample_lambda_p<R: Rng + ?Sized>(
    state: &ModelState,
    problem: &TransferProblem,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let kernel_sq = TrpTerms::from_state(problem, state)?.kernel_sq;
    let (lambda_p, x) = match config.hyper_update_kind {
        HyperUpdateKind::Slice => {
            let x0 = state.lambda_p * state.lambda_p;
            let x =
                slice_sample_positive(x0, |x| lambda_p_sq_log_kernel(x, state, kernel_sq), rng)?;
            (x.sqrt(), x)
        }
        HyperUpdateKind::InverseGamma => {
            let kp = (state.k() * state.p()) as f64;
            let lp = inv_gamma(
                0.5 * (kp + 1.0),
                1.0 / state.a_p + kernel_sq / state.sigma2,
                rng,
            )?;
            (lp, lp * lp)
        }
    };
    let a_p = sample_aux(x, rng)?;
    Ok((lambda_p, a_p))
}

/// `(lambda_t, lambda_p, a_t, a_p)` from a single stream.
pub fn sample_scale_hyperparams<R: Rng + ?Sized>(
    state: &ModelState,
    problem: &TransferProblem,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<(f64, f64, f64, f64)> {
    let (lambda_t, a_t) = sample_lambda_t(state, config, rng)?;
    let mut s = state.clone();
    s.lambda_t = lambda_t;
    s.a_t = a_t;
    let (lambda_p, a_p) = sample_lambda_p(&s, problem, config, rng)?;
    Ok((lambda_t, lambda_p, a_t, a_p))
}

fn clamped_rho(rho: f64) -> f64 {
    rho.clamp(RHO_CLAMP, 1.0 - RHO_CLAMP)
}

/// Unnormalized log conditional density of the inclusion vector `eta`
/// (all other parameters taken from `state`).
pub fn eta_log_density(eta: &[bool], state: &ModelState, problem: &TransferProblem) -> Result<f64> {
    let terms = TrpTerms::new(problem, &state.beta_a, &state.omega, eta, state.tau)?;
    let included = eta.iter().filter(|&&e| e).count() as f64;
    let rho = clamped_rho(state.rho);
    Ok(terms.log_prior_part(state.sigma2, state.lambda_p)
        + included * rho.ln()
        + (eta.len() as f64 - included) * (1.0 - rho).ln())
}

/// Log conditional odds of `eta_k = 1` against `eta_k = 0`.
pub fn eta_log_odds(k: usize, state: &ModelState, problem: &TransferProblem) -> Result<f64> {
    if k >= state.k() {
        return Err(TrpError::InvalidInput(format!("no source with index {k}")));
    }
    let mut on = state.eta.clone();
    on[k] = true;
    let mut off = state.eta.clone();
    off[k] = false;
    Ok(eta_log_density(&on, state, problem)? - eta_log_density(&off, state, problem)?)
}

/// `rho ~ Beta(sum eta + 1/2, K - sum eta + 1/2)`.
pub fn sample_rho<R: Rng + ?Sized>(state: &ModelState, rng: &mut R) -> Result<f64> {
    let s = state.eta.iter().filter(|&&e| e).count() as f64;
    let k = state.k() as f64;
    beta(s + 0.5, k - s + 0.5, rng)
}

/// Random-walk Metropolis on `tau` with Robbins-Monro scale adaptation.
#[derive(Clone, Debug)]
pub struct TauSampler {
    pub log_sd: f64,
    pub target_accept: f64,
    pub proposed: u64,
    pub accepted: u64,
}

impl TauSampler {
    pub fn new(sd: f64, target_accept: f64) -> Self {
        TauSampler {
            log_sd: sd.ln(),
            target_accept,
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn sd(&self) -> f64 {
        self.log_sd.exp()
    }

    /// Log density of `tau` given the rest: the prior on `beta_A` through
    /// `B(tau)`, its pseudodeterminant, and a half-Cauchy prior.
    pub fn log_target(tau: f64, state: &ModelState, problem: &TransferProblem) -> Result<f64> {
        let terms = TrpTerms::new(problem, &state.beta_a, &state.omega, &state.eta, tau)?;
        Ok(terms.log_prior_part(state.sigma2, state.lambda_p) - (1.0 + tau * tau).ln())
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &ModelState,
        problem: &TransferProblem,
        rng: &mut R,
        adapt_step: f64,
    ) -> Result<(f64, bool)> {
        let proposal = state.tau + self.sd() * std_normal(rng);
        let u: f64 = rng.random();
        let accepted = if proposal > 0.0 {
            if proposal == state.tau {
                true
            } else {
                let log_ratio = Self::log_target(proposal, state, problem)?
                    - Self::log_target(state.tau, state, problem)?;
                u.ln() < log_ratio
            }
        } else {
            false
        };
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
        if adapt_step > 0.0 {
            let ind = if accepted { 1.0 } else { 0.0 };
            self.log_sd += adapt_step * (ind - self.target_accept);
        }
        Ok((if accepted { proposal } else { state.tau }, accepted))
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

pub fn mh_tau<R: Rng + ?Sized>(
    state: &ModelState,
    problem: &TransferProblem,
    rng: &mut R,
    adapt_step: f64,
    sampler: &mut TauSampler,
) -> Result<(f64, bool)> {
    sampler.step(state, problem, rng, adapt_step)
}
