//! Scalar draws used by the conditionals.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Result, TrpError};

pub fn std_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Gamma draw with the given shape and rate.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| TrpError::Degenerate(format!("gamma(shape {shape}, rate {rate}): {e}")))?;
    Ok(g.sample(rng))
}

/// Inverse-gamma draw: `rate / Gamma(shape, 1)`.
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(TrpError::Degenerate(format!(
            "inverse-gamma rate must be positive, got {rate}"
        )));
    }
    let g = gamma(shape, 1.0, rng)?;
    Ok(rate / g)
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let d = Beta::new(a, b).map_err(|e| TrpError::Degenerate(format!("beta({a}, {b}): {e}")))?;
    Ok(d.sample(rng))
}

/// Inverse-Gaussian (Wald) draw by the transformation-with-rejection method,
/// arranged to stay finite for very large means.
pub fn wald<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = std_normal(rng);
    let y = nu * nu;
    let w = mean * y / (2.0 * shape);
    let x = mean / (1.0 + w + (w * (w + 2.0)).sqrt());
    let u: f64 = rng.random();
    if u * (mean + x) <= mean {
        x
    } else {
        (mean / x) * mean
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
