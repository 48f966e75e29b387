//! Univariate slice sampling with the doubling procedure and shrinkage.

use rand::Rng;

use crate::error::{Result, TrpError};
use crate::gibbs::dist::exp1;

pub const MAX_DOUBLINGS: usize = 200;
const MAX_SHRINKS: usize = 10_000;

/// One slice-sampling update of `x0` under the log density `log_f` on the
/// real line. `width` is the initial interval width.
pub fn slice_sample<F, R>(x0: f64, log_f: F, width: f64, rng: &mut R) -> Result<f64>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let f0 = log_f(x0);
    if !f0.is_finite() {
        return Err(TrpError::Degenerate(format!(
            "slice sampler started at a point of zero density ({x0})"
        )));
    }
    let level = f0 - exp1(rng);
    let u: f64 = rng.random();
    let mut lo = x0 - width * u;
    let mut hi = lo + width;
    let mut doublings = 0;
    while level < log_f(lo) || level < log_f(hi) {
        if doublings == MAX_DOUBLINGS {
            return Err(TrpError::SliceStepOut(MAX_DOUBLINGS));
        }
        let span = hi - lo;
        if rng.random::<f64>() < 0.5 {
            lo -= span;
        } else {
            hi += span;
        }
        doublings += 1;
    }
    for _ in 0..MAX_SHRINKS {
        let x1 = lo + rng.random::<f64>() * (hi - lo);
        if level < log_f(x1) && accept_doubling(x0, x1, level, width, lo, hi, &log_f) {
            return Ok(x1);
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
    }
    Err(TrpError::NonConvergence {
        what: "slice sampler shrinkage".into(),
        iterations: MAX_SHRINKS,
    })
}

fn accept_doubling<F: Fn(f64) -> f64>(
    x0: f64,
    x1: f64,
    level: f64,
    width: f64,
    lo: f64,
    hi: f64,
    log_f: &F,
) -> bool {
    let (mut lo, mut hi) = (lo, hi);
    let mut differ = false;
    while hi - lo > 1.1 * width {
        let mid = 0.5 * (lo + hi);
        if (x0 < mid && x1 >= mid) || (x0 >= mid && x1 < mid) {
            differ = true;
        }
        if x1 < mid {
            hi = mid;
        } else {
            lo = mid;
        }
        if differ && level >= log_f(lo) && level >= log_f(hi) {
            return false;
        }
    }
    true
}

/// Slice update of a positive variable through its logarithm.
pub fn slice_sample_positive<F, R>(x0: f64, log_f: F, rng: &mut R) -> Result<f64>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(x0 > 0.0) {
        return Err(TrpError::InvalidInput(format!(
            "positive slice update started at {x0}"
        )));
    }
    let g = |u: f64| {
        let x = u.exp();
        if x > 0.0 && x.is_finite() {
            log_f(x) + u
        } else {
            f64::NEG_INFINITY
        }
    };
    let u = slice_sample(x0.ln(), g, 1.0, rng)?;
    Ok(u.exp())
}
