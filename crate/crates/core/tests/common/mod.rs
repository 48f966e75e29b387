#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trp::transfer::{Dataset, TransferProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `A A^T / n + ridge I`, comfortably conditioned.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, ridge: f64) -> DMatrix<f64> {
    let a = gaussian_matrix(rng, n, n + 2);
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * ridge
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, beta: &DVector<f64>, noise: f64) -> Dataset {
    let x = gaussian_matrix(rng, n, beta.len());
    let e = gaussian_vector(rng, n) * noise;
    let y = &x * beta + e;
    Dataset::new(x, y).unwrap()
}

/// Target and `k` sources sharing a common coefficient up to small shifts.
pub fn random_problem<R: Rng>(
    rng: &mut R,
    p: usize,
    k: usize,
    n0: usize,
    ns: usize,
) -> TransferProblem {
    let beta = gaussian_vector(rng, p);
    let target = random_dataset(rng, n0, &beta, 1.0);
    let sources = (0..k)
        .map(|_| {
            let b = &beta + gaussian_vector(rng, p) * 0.2;
            random_dataset(rng, ns, &b, 1.0)
        })
        .collect();
    TransferProblem::new(target, sources).unwrap()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}
