use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    assign_folds, cv_lasso, lambda_grid, pooled_ols, trans_lasso_cv, FirstStage, DEFAULT_GRID_LEN,
    DEFAULT_GRID_RATIO,
};
use crate::error::{Result, TrpError};
use crate::gibbs::{run_chain, SamplerConfig};
use crate::harness::io::{BenchResult, Manifest};
use crate::harness::standardize::Standardizer;
use crate::harness::synth::{gen_sparse_transfer, SparseTransferSpec};
use crate::map::{map_transformed_cd, MapProblem, Reduced};
use crate::transfer::{Dataset, TransferProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "trp-gibbs")]
    TrpGibbs,
    #[serde(rename = "trp-map")]
    TrpMap,
    #[serde(rename = "trans-lasso")]
    TransLasso,
    #[serde(rename = "target-lasso")]
    TargetLasso,
    #[serde(rename = "pooled-ols")]
    PooledOls,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::TrpGibbs,
        Method::TrpMap,
        Method::TransLasso,
        Method::TargetLasso,
        Method::PooledOls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TrpGibbs => "trp-gibbs",
            Method::TrpMap => "trp-map",
            Method::TransLasso => "trans-lasso",
            Method::TargetLasso => "target-lasso",
            Method::PooledOls => "pooled-ols",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TrpError::InvalidInput(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// `k` and `seed` of the template are replaced per repetition.
    Generator(SparseTransferSpec),
    Manifest(Manifest),
}

/// Penalty settings of the `trp-map` method; `lambda_t` is chosen by
/// cross-validation on the target training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapMethodConfig {
    pub tau: f64,
    pub lambda_p: f64,
    pub grid_len: usize,
}

impl Default for MapMethodConfig {
    fn default() -> Self {
        MapMethodConfig {
            tau: 1.0,
            lambda_p: 0.1,
            grid_len: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub source: DataSource,
    pub k_values: Vec<usize>,
    pub n_reps: usize,
    pub methods: Vec<Method>,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub map: MapMethodConfig,
    pub n_folds: usize,
    /// Record wall time; off by default so result files are reproducible.
    pub timing: bool,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrpError::InvalidInput(m));
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return bad("K values must be positive and nonempty".into());
        }
        if self.n_reps == 0 {
            return bad("need at least one repetition".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!(
                "holdout fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            ));
        }
        if self.n_folds < 2 {
            return bad("need at least 2 folds".into());
        }
        let mut sc = self.sampler.clone();
        sc.fixed.eta = None;
        sc.validate(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub method: String,
    pub k: usize,
    pub rep: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub results: Vec<BenchResult>,
    pub failures: Vec<Failure>,
}

/// Seed of one repetition, derived from the master seed.
pub fn repetition_seed(seed: u64, k: usize, rep: usize) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((k as u64) << 32) | rep as u64);
    r.next_u64()
}

/// Random train/test split of the target; returns `(train, test)`.
pub fn split_target(
    d: &Dataset,
    holdout_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, Dataset)> {
    let n = d.n();
    let n_test =
        ((holdout_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    if n < 2 {
        return Err(TrpError::InvalidInput(
            "target needs at least two rows to split".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (test, train) = idx.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.select_rows(&train)?, d.select_rows(&test)?))
}

fn mse(test: &Dataset, beta: &DVector<f64>) -> f64 {
    test.residual_sq(beta) / test.n() as f64
}

struct Instance {
    train: TransferProblem,
    test: Dataset,
}

fn instance(cfg: &BenchConfig, k: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (target, sources, standardize) = match &cfg.source {
        DataSource::Generator(template) => {
            let mut spec = template.clone();
            spec.k = k;
            spec.seed = rng.next_u64();
            let data = gen_sparse_transfer(&spec)?;
            (
                data.problem.target().clone(),
                data.problem.sources().to_vec(),
                false,
            )
        }
        DataSource::Manifest(m) => {
            let target = m.load_target()?;
            let mut all = m.load_sources(target.p())?;
            if k > all.len() {
                return Err(TrpError::InvalidInput(format!(
                    "K = {k} exceeds the {} sources in the manifest",
                    all.len()
                )));
            }
            all.shuffle(&mut rng);
            all.truncate(k);
            (target, all, m.standardize)
        }
    };
    let (train, test) = split_target(&target, cfg.holdout_fraction, &mut rng)?;
    let mut problem = TransferProblem::new(train, sources)?;
    let mut test = test;
    if standardize {
        let st = Standardizer::fit(problem.target());
        problem = st.apply_problem(&problem)?;
        test = st.apply(&test)?;
    }
    Ok(Instance {
        train: problem,
        test,
    })
}

fn fit_method(
    method: Method,
    cfg: &BenchConfig,
    problem: &TransferProblem,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(method as u64 + 1);
    match method {
        Method::TrpGibbs => {
            let mut sc = cfg.sampler.clone();
            sc.seed = seed;
            sc.fixed.eta = None;
            run_chain(problem, &sc)?.beta_mean(0)
        }
        Method::TrpMap => fit_trp_map(problem, &cfg.map, cfg.n_folds, &mut rng),
        Method::TransLasso => {
            let folds = cfg.n_folds.min(problem.target().n());
            Ok(trans_lasso_cv(problem, FirstStage::Lasso, folds, &mut rng)?.beta)
        }
        Method::TargetLasso => {
            let t = problem.target();
            let g = lambda_grid(t, DEFAULT_GRID_LEN, DEFAULT_GRID_RATIO);
            Ok(cv_lasso(t, cfg.n_folds.min(t.n()), &g, &mut rng)?.beta)
        }
        Method::PooledOls => pooled_ols(problem),
    }
}

/// MAP estimate with `lambda_t` chosen by cross-validation over target rows.
pub fn fit_trp_map(
    problem: &TransferProblem,
    mc: &MapMethodConfig,
    n_folds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let full = MapProblem::new(problem.clone(), 1.0, mc.tau, mc.lambda_p)?;
    let red = Reduced::new(&full)?;
    let lmax = (&red.g0 * (&red.beta0_hat - &red.z_hat)).amax().max(1e-12);
    let len = mc.grid_len.max(2);
    let grid: Vec<f64> = (0..len)
        .map(|i| lmax * (DEFAULT_GRID_RATIO.ln() * i as f64 / (len - 1) as f64).exp())
        .collect();
    let target = problem.target();
    let n = target.n();
    let folds = assign_folds(n, n_folds.min(n), rng)?;
    let n_f = folds.iter().max().map_or(0, |m| m + 1);
    let mut best = (grid[0], f64::INFINITY);
    for &lam in &grid {
        let mut sse = 0.0;
        for f in 0..n_f {
            let tr: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let te: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let sub = problem.with_target(target.select_rows(&tr)?)?;
            let mp = MapProblem::new(sub, lam * tr.len() as f64 / n as f64, mc.tau, mc.lambda_p)?;
            let b = map_transformed_cd(&mp)?
                .beta_a
                .rows(0, problem.p())
                .into_owned();
            sse += target.select_rows(&te)?.residual_sq(&b);
        }
        if sse < best.1 {
            best = (lam, sse);
        }
    }
    let mp = MapProblem::new(problem.clone(), best.0, mc.tau, mc.lambda_p)?;
    Ok(map_transformed_cd(&mp)?
        .beta_a
        .rows(0, problem.p())
        .into_owned())
}

/// Every method on every repetition of every `K`. A failing fit becomes a
/// row with an empty MSE plus an entry in `failures`.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for &k in &cfg.k_values {
        for rep in 0..cfg.n_reps {
            let seed = repetition_seed(cfg.seed, k, rep);
            let inst = instance(cfg, k, seed)?;
            for &m in &cfg.methods {
                let start = Instant::now();
                let fit = fit_method(m, cfg, &inst.train, seed);
                let seconds = if cfg.timing {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                let mse = match fit {
                    Ok(beta) => Some(mse(&inst.test, &beta)),
                    Err(e) => {
                        failures.push(Failure {
                            method: m.name().into(),
                            k,
                            rep,
                            message: e.to_string(),
                        });
                        None
                    }
                };
                results.push(BenchResult {
                    method: m.name().into(),
                    k,
                    rep,
                    mse,
                    seconds,
                });
            }
        }
    }
    Ok(BenchOutput { results, failures })
}

/// Median of the finite MSE values of one method at one `K`.
pub fn median_mse(results: &[BenchResult], method: &str, k: usize) -> Option<f64> {
    let mut v: Vec<f64> = results
        .iter()
        .filter(|r| r.method == method && r.k == k)
        .filter_map(|r| r.mse)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
