//! Monte Carlo summaries of autocorrelated draws.

/// Standard error of the mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> f64 {
    let b = n_batches.max(2);
    let m = xs.len() / b;
    if m == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| xs[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    (var / b as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
