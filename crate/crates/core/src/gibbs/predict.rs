use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, TrpError};
use crate::gibbs::draws::{column_means, PosteriorDraws};

/// Per-row predictive mean and central interval for the target response.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub mean: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub level: f64,
}

pub const DEFAULT_LEVEL: f64 = 0.9;

pub fn posterior_predict(draws: &PosteriorDraws, x_new: &DMatrix<f64>) -> Result<Prediction> {
    posterior_predict_level(draws, x_new, DEFAULT_LEVEL)
}

/// The interval comes from the quantiles of the mixture over draws of
/// `N(x^T beta_0, sigma^2)`.
pub fn posterior_predict_level(
    draws: &PosteriorDraws,
    x_new: &DMatrix<f64>,
    level: f64,
) -> Result<Prediction> {
    let p = draws.param_layout.p;
    if x_new.ncols() != p {
        return Err(TrpError::Dimension(format!(
            "new design has {} columns, expected {p}",
            x_new.ncols()
        )));
    }
    if draws.n_draws() == 0 {
        return Err(TrpError::InvalidInput("no retained draws".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(TrpError::InvalidInput(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let beta0 = draws.beta(0)?;
    let sd: Vec<f64> = draws.column("sigma2")?.iter().map(|s| s.sqrt()).collect();
    let fitted = x_new * beta0.transpose();
    let mean = x_new * column_means(&beta0);
    let alpha = 0.5 * (1.0 - level);
    let n = x_new.nrows();
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    for i in 0..n {
        let locs: Vec<f64> = fitted.row(i).iter().copied().collect();
        lower[i] = mixture_quantile(&locs, &sd, alpha);
        upper[i] = mixture_quantile(&locs, &sd, 1.0 - alpha);
    }
    Ok(Prediction {
        mean,
        lower,
        upper,
        level,
    })
}

fn mixture_quantile(locs: &[f64], sds: &[f64], q: f64) -> f64 {
    let std = Normal::standard();
    let n = locs.len() as f64;
    let cdf = |x: f64| {
        locs.iter()
            .zip(sds)
            .map(|(m, s)| std.cdf((x - m) / s))
            .sum::<f64>()
            / n
    };
    let smax = sds.iter().cloned().fold(0.0, f64::max);
    let mut lo = locs.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * smax;
    let mut hi = locs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * smax;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
