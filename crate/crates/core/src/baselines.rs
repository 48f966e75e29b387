//! Frequentist comparators: least squares, ridge, lasso with cross-validation,
//! pooled least squares, a hierarchical-mean prior and two-step Trans-Lasso.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};
use crate::linalg::{l1_quadratic_cd, solve_spd_vec};
use crate::transfer::{Dataset, TransferProblem};

const LASSO_TOL: f64 = 1e-9;
const LASSO_MAX_SWEEPS: usize = 100_000;
pub const DEFAULT_GRID_LEN: usize = 30;
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;
pub const DEFAULT_FOLDS: usize = 5;

pub fn ols(d: &Dataset) -> Result<DVector<f64>> {
    solve_spd_vec(d.gram(), d.xty(), "Gram matrix")
}

/// `(G + tau I)^{-1} X^T y`.
pub fn ridge(d: &Dataset, tau: f64) -> Result<DVector<f64>> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(TrpError::InvalidInput(format!(
            "ridge penalty must be nonnegative, got {tau}"
        )));
    }
    let p = d.p();
    let m = d.gram() + DMatrix::identity(p, p) * tau;
    solve_spd_vec(&m, d.xty(), "Gram matrix plus ridge")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub lambda: f64,
    /// `(lambda, mean held-out squared error)` when chosen by cross-validation.
    pub cv_path: Vec<(f64, f64)>,
    /// Fold index of every row when chosen by cross-validation.
    pub folds: Vec<usize>,
}

/// Minimizer of `||y - X beta||^2 / 2 + lambda ||beta||_1`.
pub fn lasso_cd(d: &Dataset, lambda: f64) -> Result<LassoFit> {
    let beta = lasso_beta(d.gram(), d.xty(), lambda, None)?;
    Ok(LassoFit {
        beta,
        lambda,
        cv_path: Vec::new(),
        folds: Vec::new(),
    })
}

fn lasso_beta(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    lambda: f64,
    warm: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(TrpError::InvalidInput(format!(
            "lasso penalty must be nonnegative, got {lambda}"
        )));
    }
    let x0 = warm.cloned().unwrap_or_else(|| DVector::zeros(xty.len()));
    Ok(l1_quadratic_cd(gram, xty, lambda, &x0, LASSO_TOL, LASSO_MAX_SWEEPS, "lasso")?.x)
}

/// Largest violation of the lasso subgradient conditions at `beta`.
pub fn lasso_kkt_violation(d: &Dataset, beta: &DVector<f64>, lambda: f64) -> f64 {
    let grad = d.xty() - d.gram() * beta;
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Geometric grid from `||X^T y||_inf` downwards, largest first.
pub fn lambda_grid(d: &Dataset, len: usize, ratio: f64) -> Vec<f64> {
    let lmax = d.xty().amax();
    if !(lmax > 0.0) || len < 2 {
        return vec![lmax.max(0.0)];
    }
    let step = ratio.ln() / (len - 1) as f64;
    (0..len).map(|i| lmax * (step * i as f64).exp()).collect()
}

/// Seeded fold labels `0..n_folds` for `n` rows.
pub fn assign_folds<R: Rng + ?Sized>(n: usize, n_folds: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_folds < 2 || n_folds > n {
        return Err(TrpError::InvalidInput(format!(
            "need 2 <= folds <= rows, got {n_folds} folds for {n} rows"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        folds[row] = pos % n_folds;
    }
    Ok(folds)
}

struct Split {
    train: Dataset,
    test: Dataset,
}

fn splits(d: &Dataset, folds: &[usize], n_folds: usize) -> Result<Vec<Split>> {
    (0..n_folds)
        .map(|f| {
            let train: Vec<usize> = (0..d.n()).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..d.n()).filter(|&i| folds[i] == f).collect();
            Ok(Split {
                train: d.select_rows(&train)?,
                test: d.select_rows(&test)?,
            })
        })
        .collect()
}

/// Picks the grid value with the smallest mean held-out squared error.
/// Penalties are rescaled by the training fraction so they stay comparable
/// with the full-data fit; ties go to the larger penalty.
fn cross_validate<F>(
    d: &Dataset,
    n_folds: usize,
    grid: &[f64],
    folds: Vec<usize>,
    fit: F,
) -> Result<(f64, Vec<(f64, f64)>, Vec<usize>)>
where
    F: Fn(&Dataset, f64) -> Result<DVector<f64>>,
{
    if grid.is_empty() {
        return Err(TrpError::InvalidInput("empty penalty grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let parts = splits(d, &folds, n_folds)?;
    let n = d.n() as f64;
    let mut path = Vec::with_capacity(grid.len());
    let mut best = (grid[0], f64::INFINITY);
    for &lam in &grid {
        let mut sse = 0.0;
        for s in &parts {
            let scale = s.train.n() as f64 / n;
            let b = fit(&s.train, lam * scale)?;
            sse += s.test.residual_sq(&b);
        }
        let err = sse / n;
        path.push((lam, err));
        if err < best.1 {
            best = (lam, err);
        }
    }
    Ok((best.0, path, folds))
}

pub fn cv_lasso<R: Rng + ?Sized>(
    d: &Dataset,
    n_folds: usize,
    grid: &[f64],
    rng: &mut R,
) -> Result<LassoFit> {
    let folds = assign_folds(d.n(), n_folds, rng)?;
    let (lambda, cv_path, folds) = cross_validate(d, n_folds, grid, folds, |tr, l| {
        lasso_beta(tr.gram(), tr.xty(), l, None)
    })?;
    let beta = lasso_beta(d.gram(), d.xty(), lambda, None)?;
    Ok(LassoFit {
        beta,
        lambda,
        cv_path,
        folds,
    })
}

/// Ridge with the penalty chosen by cross-validation; the fit reuses
/// [`LassoFit`] with `lambda` holding the ridge penalty.
pub fn cv_ridge<R: Rng + ?Sized>(
    d: &Dataset,
    n_folds: usize,
    grid: &[f64],
    rng: &mut R,
) -> Result<LassoFit> {
    let folds = assign_folds(d.n(), n_folds, rng)?;
    let (lambda, cv_path, folds) = cross_validate(d, n_folds, grid, folds, ridge)?;
    Ok(LassoFit {
        beta: ridge(d, lambda)?,
        lambda,
        cv_path,
        folds,
    })
}

/// Ridge grid spanning the Gram spectrum scale.
pub fn ridge_grid(d: &Dataset, len: usize) -> Vec<f64> {
    let scale = d.gram().trace() / d.p() as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let lo = (1e-4 * scale).ln();
    let hi = (10.0 * scale).ln();
    let len = len.max(2);
    (0..len)
        .map(|i| (hi + (lo - hi) * i as f64 / (len - 1) as f64).exp())
        .collect()
}

/// All datasets stacked by rows.
pub fn pooled_ols(problem: &TransferProblem) -> Result<DVector<f64>> {
    let all = Dataset::concat(problem.datasets())?;
    ols(&all)
}

/// Gaussian prior on `beta_0` with precision `kappa I / sigma^2`, centered
/// at the average of the per-source least-squares fits; returns the
/// posterior mean.
pub fn hierarchical_mean_prior(problem: &TransferProblem, kappa: f64) -> Result<DVector<f64>> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(TrpError::InvalidInput(format!(
            "prior precision must be nonnegative, got {kappa}"
        )));
    }
    let p = problem.p();
    let mut center = DVector::zeros(p);
    for s in problem.sources() {
        center += ols(s)?;
    }
    center /= problem.k() as f64;
    let t = problem.target();
    let m = t.gram() + DMatrix::identity(p, p) * kappa;
    solve_spd_vec(
        &m,
        &(t.xty() + center * kappa),
        "target Gram plus prior precision",
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStage {
    Lasso,
    Ridge,
}

/// Pooled-source fit followed by a lasso correction on target residuals.
pub fn trans_lasso(
    problem: &TransferProblem,
    first_stage: FirstStage,
    lambda1: f64,
    lambda2: f64,
) -> Result<DVector<f64>> {
    let pooled = Dataset::concat(problem.sources().iter())?;
    let tilde = match first_stage {
        FirstStage::Lasso => lasso_cd(&pooled, lambda1)?.beta,
        FirstStage::Ridge => ridge(&pooled, lambda1)?,
    };
    let delta = correction(problem.target(), &tilde, |r| Ok(lasso_cd(r, lambda2)?.beta))?;
    Ok(tilde + delta)
}

fn correction<F>(target: &Dataset, tilde: &DVector<f64>, fit: F) -> Result<DVector<f64>>
where
    F: FnOnce(&Dataset) -> Result<DVector<f64>>,
{
    let resid = target.y() - target.x() * tilde;
    fit(&target.with_response(resid)?)
}

/// Both penalties of [`trans_lasso`] chosen by cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransLassoFit {
    pub beta: DVector<f64>,
    pub first: LassoFit,
    pub second: LassoFit,
}

pub fn trans_lasso_cv<R: Rng + ?Sized>(
    problem: &TransferProblem,
    first_stage: FirstStage,
    n_folds: usize,
    rng: &mut R,
) -> Result<TransLassoFit> {
    let pooled = Dataset::concat(problem.sources().iter())?;
    let first = match first_stage {
        FirstStage::Lasso => {
            let g = lambda_grid(&pooled, DEFAULT_GRID_LEN, DEFAULT_GRID_RATIO);
            cv_lasso(&pooled, n_folds, &g, rng)?
        }
        FirstStage::Ridge => {
            let g = ridge_grid(&pooled, DEFAULT_GRID_LEN);
            cv_ridge(&pooled, n_folds, &g, rng)?
        }
    };
    let target = problem.target();
    let resid = target.with_response(target.y() - target.x() * &first.beta)?;
    let folds = n_folds.min(resid.n());
    let g = lambda_grid(&resid, DEFAULT_GRID_LEN, DEFAULT_GRID_RATIO);
    let second = cv_lasso(&resid, folds, &g, rng)?;
    Ok(TransLassoFit {
        beta: &first.beta + &second.beta,
        first,
        second,
    })
}
