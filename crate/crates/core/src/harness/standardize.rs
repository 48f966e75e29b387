use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::transfer::{Dataset, TransferProblem};

/// Per-column z-scoring fitted on one dataset. Constant columns, such as an
/// intercept, are left as they are.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub sd: DVector<f64>,
}

impl Standardizer {
    pub fn fit(d: &Dataset) -> Self {
        let (n, p) = (d.n() as f64, d.p());
        let x = d.x();
        let mut mean = DVector::zeros(p);
        let mut sd = DVector::from_element(p, 1.0);
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / n;
            let v = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / n;
            if v > 1e-24 * (1.0 + m * m) {
                mean[j] = m;
                sd[j] = v.sqrt();
            }
        }
        Standardizer { mean, sd }
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        let x = d.x();
        let z = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[j]) / self.sd[j]
        });
        Dataset::new(z, d.y().clone())
    }

    pub fn apply_problem(&self, problem: &TransferProblem) -> Result<TransferProblem> {
        let target = self.apply(problem.target())?;
        let sources = problem
            .sources()
            .iter()
            .map(|s| self.apply(s))
            .collect::<Result<Vec<_>>>()?;
        TransferProblem::new(target, sources)
    }
}
