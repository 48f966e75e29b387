use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrpError};
use crate::gibbs::config::SamplerConfig;
use crate::gibbs::state::ModelState;
use crate::gibbs::tempering::SwapStats;

/// Named column ranges of a flattened [`ModelState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub p: usize,
    pub k: usize,
    pub entries: Vec<(String, Range<usize>)>,
}

impl ParamLayout {
    pub fn new(p: usize, k: usize) -> Self {
        let sizes = [
            ("beta_a", (k + 1) * p),
            ("sigma2", 1),
            ("omega", p),
            ("eta", k),
            ("rho", 1),
            ("lambda_t", 1),
            ("lambda_p", 1),
            ("tau", 1),
            ("a_t", 1),
            ("a_p", 1),
        ];
        let mut start = 0;
        let entries = sizes
            .iter()
            .map(|&(name, len)| {
                let r = start..start + len;
                start += len;
                (name.to_string(), r)
            })
            .collect();
        ParamLayout { p, k, entries }
    }

    pub fn width(&self) -> usize {
        self.entries.last().map_or(0, |(_, r)| r.end)
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.clone())
    }

    /// Column headers: `beta_<k>_<j>`, `omega_<j>`, `eta_<k>` and scalar names.
    /// Dataset `k = 0` is the target; coefficient indices start at 1.
    pub fn headers(&self) -> Vec<String> {
        let mut h = Vec::with_capacity(self.width());
        for k in 0..=self.k {
            for j in 1..=self.p {
                h.push(format!("beta_{k}_{j}"));
            }
        }
        h.push("sigma2".into());
        h.extend((1..=self.p).map(|j| format!("omega_{j}")));
        h.extend((1..=self.k).map(|k| format!("eta_{k}")));
        for name in ["rho", "lambda_t", "lambda_p", "tau", "a_t", "a_p"] {
            h.push(name.into());
        }
        h
    }

    pub fn flatten(&self, s: &ModelState) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.width());
        row.extend(s.beta_a.iter());
        row.push(s.sigma2);
        row.extend(s.omega.iter());
        row.extend(s.eta.iter().map(|&e| if e { 1.0 } else { 0.0 }));
        row.extend([s.rho, s.lambda_t, s.lambda_p, s.tau, s.a_t, s.a_p]);
        row
    }
}

/// Retained draws, one row per kept iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub draws: DMatrix<f64>,
    pub param_layout: ParamLayout,
    pub acceptance_stats: BTreeMap<String, f64>,
    pub swap_stats: SwapStats,
    pub config: SamplerConfig,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    seed: u64,
    n_draws: usize,
    config: &'a SamplerConfig,
    layout: &'a ParamLayout,
    acceptance: &'a BTreeMap<String, f64>,
    swap_proposed: &'a [u64],
    swap_accepted: &'a [u64],
    swap_rates: Vec<f64>,
}

impl PosteriorDraws {
    pub fn new(
        layout: ParamLayout,
        rows: &[Vec<f64>],
        config: SamplerConfig,
        acceptance_stats: BTreeMap<String, f64>,
        swap_stats: SwapStats,
    ) -> Self {
        let w = layout.width();
        let draws = DMatrix::from_fn(rows.len(), w, |i, j| rows[i][j]);
        PosteriorDraws {
            draws,
            param_layout: layout,
            acceptance_stats,
            swap_stats,
            config,
        }
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    /// Draws of one named block, `n_draws x len`.
    pub fn block(&self, name: &str) -> Result<DMatrix<f64>> {
        let r = self
            .param_layout
            .range(name)
            .ok_or_else(|| TrpError::InvalidInput(format!("no parameter named {name}")))?;
        Ok(self.draws.columns(r.start, r.len()).into_owned())
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let b = self.block(name)?;
        Ok(b.column(0).into_owned())
    }

    /// Draws of `beta_k`, `n_draws x P`.
    pub fn beta(&self, k: usize) -> Result<DMatrix<f64>> {
        let p = self.param_layout.p;
        if k > self.param_layout.k {
            return Err(TrpError::InvalidInput(format!("no dataset with index {k}")));
        }
        Ok(self.draws.columns(k * p, p).into_owned())
    }

    pub fn mean(&self, name: &str) -> Result<DVector<f64>> {
        let b = self.block(name)?;
        Ok(column_means(&b))
    }

    pub fn beta_mean(&self, k: usize) -> Result<DVector<f64>> {
        Ok(column_means(&self.beta(k)?))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.param_layout.headers())?;
        for i in 0..self.draws.nrows() {
            w.write_record(self.draws.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let side = Sidecar {
            seed: self.config.seed,
            n_draws: self.n_draws(),
            config: &self.config,
            layout: &self.param_layout,
            acceptance: &self.acceptance_stats,
            swap_proposed: &self.swap_stats.proposed,
            swap_accepted: &self.swap_stats.accepted,
            swap_rates: self.swap_stats.rates(),
        };
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &side)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_fn(m.ncols(), |j, _| m.column(j).sum() / n)
}
