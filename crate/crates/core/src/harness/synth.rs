//! Synthetic problems with known structure.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};
use crate::transfer::{Dataset, TransferProblem};

/// Cluster centres on the line `y = x`; within a cluster the slope is negative.
const SIMPSON_CENTRES: [f64; 2] = [1.0, 5.0];
const SIMPSON_HALF_WIDTH: f64 = 1.0;
const SIMPSON_WITHIN_SLOPE: f64 = -1.0;
pub const SIMPSON_TARGET_N: usize = 6;
pub const SIMPSON_HOLDOUT_N: usize = 200;

#[derive(Clone, Debug)]
pub struct SimpsonData {
    /// Design columns are `[1, x]`.
    pub problem: TransferProblem,
    /// Fresh target draws for scoring.
    pub holdout: Dataset,
}

fn simpson_rows<R: Rng>(rng: &mut R, clusters: &[usize], noise_sd: f64) -> Result<Dataset> {
    let n = clusters.len();
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for (i, &c) in clusters.iter().enumerate() {
        let m = SIMPSON_CENTRES[c];
        let xi = m + SIMPSON_HALF_WIDTH * (2.0 * rng.random::<f64>() - 1.0);
        let e: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = 1.0;
        x[(i, 1)] = xi;
        y[i] = m + SIMPSON_WITHIN_SLOPE * (xi - m) + noise_sd * e;
    }
    Dataset::new(x, y)
}

/// Two sources, one per cluster, and a small target drawn from both.
/// Each source alone has a negative slope while the sources pooled, and the
/// target, have a positive one.
pub fn gen_simpsons(seed: u64, n_per_cluster: usize, noise_sd: f64) -> Result<SimpsonData> {
    if n_per_cluster < 10 {
        return Err(TrpError::InvalidInput(format!(
            "need at least 10 points per cluster, got {n_per_cluster}"
        )));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(TrpError::InvalidInput(format!(
            "noise sd must be nonnegative, got {noise_sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s1 = simpson_rows(&mut rng, &vec![0; n_per_cluster], noise_sd)?;
    let s2 = simpson_rows(&mut rng, &vec![1; n_per_cluster], noise_sd)?;
    let alternate = |n: usize| (0..n).map(|i| i % 2).collect::<Vec<_>>();
    let target = simpson_rows(&mut rng, &alternate(SIMPSON_TARGET_N), noise_sd)?;
    let holdout = simpson_rows(&mut rng, &alternate(SIMPSON_HOLDOUT_N), noise_sd)?;
    Ok(SimpsonData {
        problem: TransferProblem::new(target, vec![s1, s2])?,
        holdout,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseTransferSpec {
    pub seed: u64,
    pub p: usize,
    pub k: usize,
    pub n_target: usize,
    /// Inclusive range of source sample sizes.
    pub n_source_range: (usize, usize),
    /// Nonzero target coefficients.
    pub sparsity: usize,
    /// Fraction of sources given unrelated coefficients.
    pub contamination: f64,
    /// Magnitude of the nonzero coefficients.
    pub signal: f64,
    /// Standard deviation of the per-entry gap between informative sources
    /// and the target.
    pub perturbation_sd: f64,
    pub noise_sd: f64,
    /// Make the first design column all ones.
    pub intercept: bool,
}

impl Default for SparseTransferSpec {
    fn default() -> Self {
        SparseTransferSpec {
            seed: 0,
            p: 10,
            k: 4,
            n_target: 50,
            n_source_range: (100, 200),
            sparsity: 3,
            contamination: 0.5,
            signal: 1.0,
            perturbation_sd: 0.05,
            noise_sd: 1.0,
            intercept: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta0: DVector<f64>,
    pub source_betas: Vec<DVector<f64>>,
    pub contaminated: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct SparseTransferData {
    pub problem: TransferProblem,
    pub truth: GroundTruth,
}

fn sparse_vector<R: Rng>(rng: &mut R, p: usize, s: usize, signal: f64) -> DVector<f64> {
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(rng);
    let mut b = DVector::zeros(p);
    for &i in idx.iter().take(s) {
        b[i] = if rng.random::<bool>() {
            signal
        } else {
            -signal
        };
    }
    b
}

fn gaussian_rows<R: Rng>(
    rng: &mut R,
    n: usize,
    beta: &DVector<f64>,
    noise_sd: f64,
    intercept: bool,
) -> Result<Dataset> {
    let p = beta.len();
    let x = DMatrix::from_fn(n, p, |_, j| {
        if intercept && j == 0 {
            1.0
        } else {
            rng.sample(StandardNormal)
        }
    });
    let noise = DVector::from_fn(n, |_, _| noise_sd * rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise;
    Dataset::new(x, y)
}

pub fn gen_sparse_transfer(spec: &SparseTransferSpec) -> Result<SparseTransferData> {
    let bad = |m: String| Err(TrpError::InvalidInput(m));
    if spec.p < 2 {
        return bad(format!("need P >= 2, got {}", spec.p));
    }
    if spec.k == 0 {
        return bad("need at least one source".into());
    }
    if !(0.0..=1.0).contains(&spec.contamination) {
        return bad(format!(
            "contamination must lie in [0, 1], got {}",
            spec.contamination
        ));
    }
    if spec.sparsity > spec.p {
        return bad(format!("sparsity {} exceeds P = {}", spec.sparsity, spec.p));
    }
    let (lo, hi) = spec.n_source_range;
    if lo == 0 || hi < lo || spec.n_target == 0 {
        return bad("sample sizes must be positive with a nonempty source range".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let beta0 = sparse_vector(&mut rng, spec.p, spec.sparsity, spec.signal);
    let n_bad = (spec.contamination * spec.k as f64).round() as usize;
    let mut order: Vec<usize> = (0..spec.k).collect();
    order.shuffle(&mut rng);
    let mut contaminated = vec![false; spec.k];
    for &j in order.iter().take(n_bad) {
        contaminated[j] = true;
    }
    let source_betas: Vec<DVector<f64>> = contaminated
        .iter()
        .map(|&c| {
            if c {
                sparse_vector(&mut rng, spec.p, spec.sparsity, spec.signal)
            } else {
                beta0.map(|b| b + spec.perturbation_sd * rng.sample::<f64, _>(StandardNormal))
            }
        })
        .collect();
    let target = gaussian_rows(
        &mut rng,
        spec.n_target,
        &beta0,
        spec.noise_sd,
        spec.intercept,
    )?;
    let sources = source_betas
        .iter()
        .map(|b| {
            let n = rng.random_range(lo..=hi);
            gaussian_rows(&mut rng, n, b, spec.noise_sd, spec.intercept)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SparseTransferData {
        problem: TransferProblem::new(target, sources)?,
        truth: GroundTruth {
            beta0,
            source_betas,
            contaminated,
        },
    })
}
