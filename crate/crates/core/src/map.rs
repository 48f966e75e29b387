//! Posterior-mode estimation.
//!
//! The mode minimizes
//! `sum_k ||beta_k - hat beta_k||^2_{G_k} / 2 + lambda_t ||beta_0 - T beta_S||_1`
//! with `G_k` the ridge-folded Grams. The penalty couples `beta_0` with a
//! linear image of the sources, so plain coordinate descent can stall; the
//! solvers here either change coordinates so the nonsmooth term becomes
//! separable or replace it by a sequence of smooth penalized problems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};
use crate::linalg::{
    block_diag, inverse_spd, l1_quadratic_cd, power_iteration, soft_threshold, solve_spd,
    solve_spd_vec, stack_vectors, symmetrize,
};
use crate::transfer::{build_transfer_matrix, Dataset, TransferMatrix, TransferProblem};

const CD_TOL: f64 = 1e-13;
const CD_MAX_SWEEPS: usize = 1_000_000;

/// Closed-form mode of the two-variable problem
/// `(b - b_hat)^2 / (2 s0) + (z - z_hat)^2 / (2 sz) + lambda_t |b - z|`.
pub fn map_univariate(beta0_hat: f64, z_hat: f64, s0: f64, sz: f64, lambda_t: f64) -> (f64, f64) {
    let d = beta0_hat - z_hat;
    let mean = (sz * beta0_hat + s0 * z_hat) / (s0 + sz);
    let excess = (d.abs() - (s0 + sz) * lambda_t).max(0.0);
    let sgn = if excess > 0.0 { d.signum() } else { 0.0 };
    let b = mean + s0 / (s0 + sz) * sgn * excess;
    let z = mean - sz / (s0 + sz) * sgn * excess;
    (b, z)
}

/// Target estimate shrunk towards a fixed source estimate.
pub fn translasso_univariate(beta0_hat: f64, z_hat: f64, s0: f64, lambda_t: f64) -> f64 {
    z_hat + soft_threshold(beta0_hat - z_hat, s0 * lambda_t)
}

pub fn univariate_objective(
    beta0: f64,
    z: f64,
    beta0_hat: f64,
    z_hat: f64,
    s0: f64,
    sz: f64,
    lambda_t: f64,
) -> f64 {
    (beta0 - beta0_hat).powi(2) / (2.0 * s0)
        + (z - z_hat).powi(2) / (2.0 * sz)
        + lambda_t * (beta0 - z).abs()
}

#[derive(Clone, Debug)]
pub struct MapProblem {
    pub problem: TransferProblem,
    pub lambda_t: f64,
    pub tau: f64,
    pub lambda_p: f64,
}

impl MapProblem {
    pub fn new(problem: TransferProblem, lambda_t: f64, tau: f64, lambda_p: f64) -> Result<Self> {
        for (name, v) in [("lambda_t", lambda_t), ("tau", tau), ("lambda_p", lambda_p)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(TrpError::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(MapProblem {
            problem,
            lambda_t,
            tau,
            lambda_p,
        })
    }

    /// One target and one source observation with `tau = lambda_p = 0`, so
    /// that the mode is [`map_univariate`] at the given parameters.
    pub fn univariate(beta0_hat: f64, z_hat: f64, s0: f64, sz: f64, lambda_t: f64) -> Result<Self> {
        let one = |s: f64, b: f64| {
            let x = (1.0 / s).sqrt();
            Dataset::new(
                DMatrix::from_element(1, 1, x),
                DVector::from_element(1, b * x),
            )
        };
        let problem = TransferProblem::new(one(s0, beta0_hat)?, vec![one(sz, z_hat)?])?;
        MapProblem::new(problem, lambda_t, 0.0, 0.0)
    }

    pub fn p(&self) -> usize {
        self.problem.p()
    }

    pub fn k(&self) -> usize {
        self.problem.k()
    }

    /// `G_k + lambda_p^2 I`.
    pub fn folded_grams(&self) -> Vec<DMatrix<f64>> {
        let p = self.p();
        let shift = self.lambda_p * self.lambda_p;
        self.problem
            .datasets()
            .map(|d| d.gram() + DMatrix::identity(p, p) * shift)
            .collect()
    }

    /// Unpenalized per-dataset optima under the folded Grams.
    pub fn hat_estimates(&self) -> Result<Vec<DVector<f64>>> {
        self.folded_grams()
            .iter()
            .zip(self.problem.datasets())
            .enumerate()
            .map(|(k, (g, d))| solve_spd_vec(g, d.xty(), &format!("folded Gram of dataset {k}")))
            .collect()
    }

    /// Transfer matrix with every source included.
    pub fn transfer(&self) -> Result<TransferMatrix> {
        build_transfer_matrix(&self.problem, &vec![true; self.k()], self.tau)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSolution {
    pub beta_a: DVector<f64>,
    /// `T beta_S`.
    pub z: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `||B beta_A - w||_inf` after each penalty weight, for the penalty method.
    pub residuals: Vec<f64>,
}

/// Hat form of the objective.
pub fn map_objective(beta_a: &DVector<f64>, mp: &MapProblem) -> Result<f64> {
    let p = mp.p();
    check_len(beta_a, (mp.k() + 1) * p)?;
    let grams = mp.folded_grams();
    let hats = mp.hat_estimates()?;
    let mut f = 0.0;
    for (k, (g, h)) in grams.iter().zip(&hats).enumerate() {
        let r = beta_a.rows(k * p, p) - h;
        f += 0.5 * r.dot(&(g * &r));
    }
    let tm = mp.transfer()?;
    Ok(f + mp.lambda_t * tm.apply_b(beta_a).lp_norm(1))
}

/// Data-space form: `sum_k ||X_k beta_k - y_k||^2 / 2 + lambda_p^2 ||beta_k||^2 / 2`
/// plus the coupling term. Differs from [`map_objective`] by a constant.
pub fn map_objective_data(beta_a: &DVector<f64>, mp: &MapProblem) -> Result<f64> {
    let p = mp.p();
    check_len(beta_a, (mp.k() + 1) * p)?;
    let lp2 = mp.lambda_p * mp.lambda_p;
    let mut f = 0.0;
    for (k, d) in mp.problem.datasets().enumerate() {
        let b = beta_a.rows(k * p, p).into_owned();
        f += 0.5 * d.residual_sq(&b) + 0.5 * lp2 * b.norm_squared();
    }
    let tm = mp.transfer()?;
    Ok(f + mp.lambda_t * tm.apply_b(beta_a).lp_norm(1))
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(TrpError::Dimension(format!(
            "vector has length {}, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

/// Sources written as `beta_S = T^+ z + U^T a` with the rows of `U` an
/// orthonormal basis of `ker T`; minimizing over `a` leaves a quadratic in
/// `z` with weight `d`.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub g0: DMatrix<f64>,
    pub beta0_hat: DVector<f64>,
    pub t: DMatrix<f64>,
    pub t_pinv: DMatrix<f64>,
    /// `(KP - P) x KP`.
    pub u: DMatrix<f64>,
    /// `(U G_S U^T)^{-1} U G_S T^+`.
    pub a_map: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub z_hat: DVector<f64>,
    pub a_hat: DVector<f64>,
}

impl Reduced {
    pub fn new(mp: &MapProblem) -> Result<Self> {
        let (p, k) = (mp.p(), mp.k());
        let grams = mp.folded_grams();
        let hats = mp.hat_estimates()?;
        let g_s = block_diag(&grams[1..]);
        let beta_s_hat = stack_vectors(&hats[1..]);
        let t = mp.transfer()?.t;
        let ttt = &t * t.transpose();
        let t_pinv = t.transpose() * inverse_spd(&ttt, "T T^T")?;
        let proj = symmetrize(&(&t_pinv * &t));
        let eig = SymmetricEigen::new(proj);
        let kernel: Vec<usize> = (0..k * p).filter(|&i| eig.eigenvalues[i] < 0.5).collect();
        let mut u = DMatrix::zeros(kernel.len(), k * p);
        for (r, &i) in kernel.iter().enumerate() {
            u.row_mut(r)
                .copy_from(&eig.eigenvectors.column(i).transpose());
        }
        let gt = &g_s * &t_pinv;
        let mut d = t_pinv.transpose() * &gt;
        let a_map = if u.nrows() > 0 {
            let ugu = symmetrize(&(&u * &g_s * u.transpose()));
            let a_map = solve_spd(&ugu, &(&u * &gt), "U G_S U^T")?;
            d -= gt.transpose() * u.transpose() * &a_map;
            a_map
        } else {
            DMatrix::zeros(0, p)
        };
        let z_hat = &t * &beta_s_hat;
        let a_hat = &u * &beta_s_hat;
        Ok(Reduced {
            g0: grams[0].clone(),
            beta0_hat: hats[0].clone(),
            t,
            t_pinv,
            u,
            a_map,
            d: symmetrize(&d),
            z_hat,
            a_hat,
        })
    }

    /// Sources minimizing the quadratic part for a given `z`.
    pub fn sources_for(&self, z: &DVector<f64>) -> DVector<f64> {
        let a = &self.a_hat - &self.a_map * (z - &self.z_hat);
        &self.t_pinv * z + self.u.transpose() * a
    }

    pub fn objective(&self, beta0: &DVector<f64>, z: &DVector<f64>, lambda_t: f64) -> f64 {
        let r0 = beta0 - &self.beta0_hat;
        let rz = z - &self.z_hat;
        0.5 * r0.dot(&(&self.g0 * &r0))
            + 0.5 * rz.dot(&(&self.d * &rz))
            + lambda_t * (beta0 - z).lp_norm(1)
    }
}

fn solution(
    mp: &MapProblem,
    beta_a: DVector<f64>,
    iterations: usize,
    converged: bool,
) -> Result<MapSolution> {
    let tm = mp.transfer()?;
    let p = mp.p();
    let z = tm.apply_t(&beta_a.rows(p, beta_a.len() - p).into_owned());
    let objective = map_objective(&beta_a, mp)?;
    Ok(MapSolution {
        beta_a,
        z,
        objective,
        iterations,
        converged,
        residuals: Vec::new(),
    })
}

/// Coordinate descent in the difference `g = beta_0 - z` after profiling
/// out `beta_0` and the kernel components of the sources.
pub fn map_transformed_cd(mp: &MapProblem) -> Result<MapSolution> {
    let red = Reduced::new(mp)?;
    let p = mp.p();
    let sum = &red.g0 + &red.d;
    let sum_inv_d = solve_spd(&sum, &red.d, "G_0 + D")?;
    let e = symmetrize(&(&red.g0 * sum_inv_d));
    let g_hat = &red.beta0_hat - &red.z_hat;
    let c = &e * &g_hat;
    let out = l1_quadratic_cd(
        &e,
        &c,
        mp.lambda_t,
        &g_hat,
        CD_TOL,
        CD_MAX_SWEEPS,
        "transformed coordinate descent",
    )?;
    let g = out.x;
    let rhs = &red.g0 * &red.beta0_hat + &red.d * (&g + &red.z_hat);
    let beta0 = solve_spd_vec(&sum, &rhs, "G_0 + D")?;
    let z = &beta0 - &g;
    let beta_s = red.sources_for(&z);
    let mut beta_a = DVector::zeros((mp.k() + 1) * p);
    beta_a.rows_mut(0, p).copy_from(&beta0);
    beta_a.rows_mut(p, beta_s.len()).copy_from(&beta_s);
    solution(mp, beta_a, out.sweeps, true)
}

/// Inner solver of the penalty method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InnerSolver {
    /// Semismooth Newton on the objective with `w` minimized out, with
    /// backtracking line search.
    Newton,
    /// The plain alternation: a gradient step in `beta_A`, then the
    /// soft-threshold update of `w`. `None` uses `1/L` at every weight.
    Gradient { step: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyOptions {
    pub c_schedule: Vec<f64>,
    pub inner: InnerSolver,
    pub max_inner: usize,
    pub tol: f64,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions {
            c_schedule: default_c_schedule(),
            inner: InnerSolver::Newton,
            max_inner: 10_000,
            tol: 1e-8,
        }
    }
}

/// `10^t` for `t = 0..=8`.
pub fn default_c_schedule() -> Vec<f64> {
    (0..=8).map(|t| 10f64.powi(t)).collect()
}

struct Smooth {
    h0: DMatrix<f64>,
    beta_hat: DVector<f64>,
    b: DMatrix<f64>,
    lambda: f64,
}

impl Smooth {
    fn quad(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let r = beta - &self.beta_hat;
        let hr = &self.h0 * &r;
        (0.5 * r.dot(&hr), hr)
    }

    /// Objective after minimizing out `w`, with its gradient.
    fn envelope(&self, beta: &DVector<f64>, c: f64) -> (f64, DVector<f64>, DVector<f64>) {
        let (f, mut grad) = self.quad(beta);
        let u = &self.b * beta;
        let mut val = f;
        let psi = u.map(|v| {
            if (c * v).abs() <= self.lambda {
                c * v
            } else {
                self.lambda * v.signum()
            }
        });
        for &v in u.iter() {
            val += if (c * v).abs() <= self.lambda {
                0.5 * c * v * v
            } else {
                self.lambda * v.abs() - self.lambda * self.lambda / (2.0 * c)
            };
        }
        grad += self.b.tr_mul(&psi);
        (val, grad, u)
    }

    fn penalized(&self, beta: &DVector<f64>, w: &DVector<f64>, c: f64) -> f64 {
        let (f, _) = self.quad(beta);
        let r = &self.b * beta - w;
        f + self.lambda * w.lp_norm(1) + 0.5 * c * r.norm_squared()
    }
}

fn soft_vec(u: &DVector<f64>, t: f64) -> DVector<f64> {
    u.map(|v| soft_threshold(v, t))
}

/// Quadratic penalty method on `w = B beta_A` with weights `c_schedule`,
/// warm-started across weights.
pub fn map_quadratic_penalty(mp: &MapProblem, opts: &PenaltyOptions) -> Result<MapSolution> {
    if opts.c_schedule.is_empty()
        || opts
            .c_schedule
            .iter()
            .any(|&c| !(c > 0.0) || !c.is_finite())
        || opts.c_schedule.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(TrpError::InvalidInput(
            "penalty weights must be positive and strictly increasing".into(),
        ));
    }
    let grams = mp.folded_grams();
    let sm = Smooth {
        h0: block_diag(&grams),
        beta_hat: stack_vectors(&mp.hat_estimates()?),
        b: mp.transfer()?.b,
        lambda: mp.lambda_t,
    };
    let scale = 1.0 + (&sm.h0 * &sm.beta_hat).amax();
    let mut beta = sm.beta_hat.clone();
    let mut residuals = Vec::with_capacity(opts.c_schedule.len());
    let mut iterations = 0;
    let mut converged = true;
    for &c in &opts.c_schedule {
        let (b, its, ok) = match opts.inner {
            InnerSolver::Newton => newton_inner(&sm, beta, c, opts, scale)?,
            InnerSolver::Gradient { step } => gradient_inner(&sm, beta, c, step, opts, scale)?,
        };
        beta = b;
        iterations += its;
        converged &= ok;
        let u = &sm.b * &beta;
        let w = soft_vec(&u, mp.lambda_t / c);
        residuals.push((u - w).amax());
    }
    let mut sol = solution(mp, beta, iterations, converged)?;
    sol.residuals = residuals;
    Ok(sol)
}

fn newton_inner(
    sm: &Smooth,
    mut beta: DVector<f64>,
    c: f64,
    opts: &PenaltyOptions,
    scale: f64,
) -> Result<(DVector<f64>, usize, bool)> {
    for it in 0..opts.max_inner {
        let (val, grad, u) = sm.envelope(&beta, c);
        if grad.amax() < opts.tol * scale {
            return Ok((beta, it, true));
        }
        let mut hess = sm.h0.clone();
        for (pidx, &v) in u.iter().enumerate() {
            if sm.lambda > 0.0 && (c * v).abs() <= sm.lambda {
                let row = sm.b.row(pidx);
                hess += row.transpose() * row * c;
            }
        }
        let dir = -solve_spd_vec(&symmetrize(&hess), &grad, "penalty Newton system")?;
        let slope = grad.dot(&dir);
        if slope >= 0.0 {
            return Ok((beta, it, false));
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &beta + &dir * t;
            let (cv, _, _) = sm.envelope(&cand, c);
            if cv <= val + 1e-4 * t * slope {
                beta = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // No representable decrease left: the iterate is optimal to
            // working precision.
            let (_, g, _) = sm.envelope(&beta, c);
            return Ok((beta, it + 1, g.amax() < 1e-6 * scale));
        }
    }
    Ok((beta, opts.max_inner, false))
}

fn gradient_inner(
    sm: &Smooth,
    mut beta: DVector<f64>,
    c: f64,
    step: Option<f64>,
    opts: &PenaltyOptions,
    scale: f64,
) -> Result<(DVector<f64>, usize, bool)> {
    let curv = symmetrize(&(&sm.h0 + sm.b.transpose() * &sm.b * c));
    let l = power_iteration(&curv, 10_000, 1e-12);
    let step = match step {
        Some(s) if s >= 2.0 / l => {
            return Err(TrpError::StepSize(format!(
                "step {s:e} is not below 2/L = {:e} at penalty weight {c:e}",
                2.0 / l
            )))
        }
        Some(s) if !(s > 0.0) => {
            return Err(TrpError::StepSize(format!(
                "step must be positive, got {s}"
            )))
        }
        Some(s) => s,
        None => 1.0 / l,
    };
    let mut w = soft_vec(&(&sm.b * &beta), sm.lambda / c);
    let mut last = sm.penalized(&beta, &w, c);
    let mut increases = 0;
    for it in 0..opts.max_inner {
        let (_, hr) = sm.quad(&beta);
        let grad = hr + sm.b.tr_mul(&(&sm.b * &beta - &w)) * c;
        if grad.amax() < opts.tol * scale {
            return Ok((beta, it, true));
        }
        beta -= grad * step;
        w = soft_vec(&(&sm.b * &beta), sm.lambda / c);
        let now = sm.penalized(&beta, &w, c);
        if now > last {
            increases += 1;
            if increases >= 100 {
                return Err(TrpError::StepSize(format!(
                    "objective increased over 100 consecutive steps at penalty weight {c:e}"
                )));
            }
        } else {
            increases = 0;
        }
        last = now;
    }
    Ok((beta, opts.max_inner, false))
}

/// One entry of a [`naive_block_cd`] trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdIterate {
    pub beta0: DVector<f64>,
    pub z: DVector<f64>,
    pub objective: f64,
}

/// Exact block minimization alternating `beta_0 | z` and `z | beta_0` in
/// the reduced problem. Returns the initial point and every half-step.
pub fn naive_block_cd(
    mp: &MapProblem,
    init: (DVector<f64>, DVector<f64>),
    max_sweeps: usize,
) -> Result<Vec<CdIterate>> {
    let red = Reduced::new(mp)?;
    let p = mp.p();
    let (mut beta0, mut z) = init;
    check_len(&beta0, p)?;
    check_len(&z, p)?;
    let lam = mp.lambda_t;
    let mut traj = vec![CdIterate {
        objective: red.objective(&beta0, &z, lam),
        beta0: beta0.clone(),
        z: z.clone(),
    }];
    for _ in 0..max_sweeps {
        // beta_0 = z + v with v minimizing a lasso in v.
        let c0 = &red.g0 * (&red.beta0_hat - &z);
        beta0 = &z + block_lasso(&red.g0, &c0, lam, &(&beta0 - &z))?;
        traj.push(CdIterate {
            objective: red.objective(&beta0, &z, lam),
            beta0: beta0.clone(),
            z: z.clone(),
        });
        let cz = &red.d * (&red.z_hat - &beta0);
        z = &beta0 + block_lasso(&red.d, &cz, lam, &(&z - &beta0))?;
        traj.push(CdIterate {
            objective: red.objective(&beta0, &z, lam),
            beta0: beta0.clone(),
            z: z.clone(),
        });
        let n = traj.len();
        if (&traj[n - 1].beta0 - &traj[n - 3].beta0).amax() == 0.0
            && (&traj[n - 1].z - &traj[n - 3].z).amax() == 0.0
        {
            break;
        }
    }
    Ok(traj)
}

fn block_lasso(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    lam: f64,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(l1_quadratic_cd(h, c, lam, x0, CD_TOL, CD_MAX_SWEEPS, "block lasso")?.x)
}

/// `beta_0` shrunk towards the fixed pooled source fit `T hat beta_S`
/// in the target's own geometry.
pub fn modified_trans_lasso(mp: &MapProblem) -> Result<DVector<f64>> {
    let red = Reduced::new(mp)?;
    let g_hat = &red.beta0_hat - &red.z_hat;
    let c = &red.g0 * &g_hat;
    let v = block_lasso(&red.g0, &c, mp.lambda_t, &g_hat)?;
    Ok(&red.z_hat + v)
}

/// Largest violation of the subgradient optimality conditions at `beta_a`.
/// The coupling subgradient is read off the `beta_0` equation and then
/// checked for membership and against the source equations.
pub fn map_optimality_violation(beta_a: &DVector<f64>, mp: &MapProblem) -> Result<f64> {
    let p = mp.p();
    check_len(beta_a, (mp.k() + 1) * p)?;
    let grams = mp.folded_grams();
    let hats = mp.hat_estimates()?;
    let tm = mp.transfer()?;
    let grad0 = &grams[0] * (beta_a.rows(0, p) - &hats[0]);
    let u = tm.apply_b(beta_a);
    let lam = mp.lambda_t;
    let mut worst = 0.0_f64;
    let s = if lam > 0.0 {
        -&grad0 / lam
    } else {
        worst = worst.max(grad0.amax());
        DVector::zeros(p)
    };
    for i in 0..p {
        if u[i].abs() > 1e-9 {
            worst = worst.max(lam * (s[i] - u[i].signum()).abs());
        } else {
            worst = worst.max(lam * (s[i].abs() - 1.0).max(0.0));
        }
    }
    for k in 1..=mp.k() {
        let gk = &grams[k] * (beta_a.rows(k * p, p) - &hats[k]);
        let tk = tm.t.columns((k - 1) * p, p);
        let r = gk - tk.transpose() * &s * lam;
        worst = worst.max(r.amax());
    }
    Ok(worst)
}
