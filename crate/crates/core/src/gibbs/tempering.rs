//! Parallel tempering over the inclusion vector only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gibbs::conditionals::eta_log_density;
use crate::gibbs::dist::logistic;
use crate::gibbs::state::ModelState;
use crate::transfer::TransferProblem;

/// Geometric ladder `1, s^-1, s^-2, ...` of inverse temperatures.
pub fn inverse_temperatures(n: usize, spacing: f64) -> Vec<f64> {
    (0..n).map(|l| spacing.powi(-(l as i32))).collect()
}

/// Swap proposals and acceptances per adjacent ladder pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    pub proposed: Vec<u64>,
    pub accepted: Vec<u64>,
}

impl SwapStats {
    pub fn new(n_temperatures: usize) -> Self {
        let pairs = n_temperatures.saturating_sub(1);
        SwapStats {
            proposed: vec![0; pairs],
            accepted: vec![0; pairs],
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.proposed
            .iter()
            .zip(&self.accepted)
            .map(|(&p, &a)| if p == 0 { 0.0 } else { a as f64 / p as f64 })
            .collect()
    }
}

/// One tempered sweep: per-replica coordinate Gibbs on `eta`, then one
/// swap proposal for every adjacent pair. `replicas[0]` is the cold chain.
pub fn sample_eta_tempered<R: Rng + ?Sized>(
    replicas: &mut [Vec<bool>],
    inv_temps: &[f64],
    state: &ModelState,
    problem: &TransferProblem,
    rng: &mut R,
    stats: &mut SwapStats,
) -> Result<()> {
    let k = state.k();
    let mut energies = Vec::with_capacity(replicas.len());
    for (eta, &b) in replicas.iter_mut().zip(inv_temps) {
        let mut current = eta_log_density(eta, state, problem)?;
        for j in 0..k {
            eta[j] = !eta[j];
            let flipped = eta_log_density(eta, state, problem)?;
            eta[j] = !eta[j];
            let log_odds = if eta[j] {
                current - flipped
            } else {
                flipped - current
            };
            let u: f64 = rng.random();
            let new = u < logistic(b * log_odds);
            if new != eta[j] {
                eta[j] = new;
                current = flipped;
            }
        }
        energies.push(current);
    }
    for l in 0..replicas.len().saturating_sub(1) {
        let log_acc = (inv_temps[l] - inv_temps[l + 1]) * (energies[l + 1] - energies[l]);
        let u: f64 = rng.random();
        stats.proposed[l] += 1;
        if u.ln() < log_acc {
            replicas.swap(l, l + 1);
            energies.swap(l, l + 1);
            stats.accepted[l] += 1;
        }
    }
    Ok(())
}
