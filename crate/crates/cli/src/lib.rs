//! Command-line front end: fitting, benchmarking and the two demonstrations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use trp::baselines::{self, FirstStage};
use trp::gibbs::{run_chain, HyperUpdateKind, PriorKind, SamplerConfig};
use trp::harness::bench::{median_mse, MapMethodConfig};
use trp::harness::io::write_json;
use trp::harness::{
    gen_simpsons, run_benchmark, write_dataset, write_results, BenchConfig, DataSource, Manifest,
    Method, SparseTransferSpec,
};
use trp::map::{
    map_quadratic_penalty, map_transformed_cd, map_univariate, naive_block_cd,
    univariate_objective, MapProblem, MapSolution, PenaltyOptions,
};
use trp::transfer::{build_transfer_matrix, per_source_ols, TransferProblem};
use trp::{Result, TrpError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Parameters of the coordinate-descent counterexample.
pub const CD_DEMO: CdDemo = CdDemo {
    beta0_hat: 0.75,
    z_hat: -0.3,
    s0: 0.3,
    sz: 0.5,
    lambda_t: 0.5,
    init: (-1.5, 0.7),
};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CdDemo {
    pub beta0_hat: f64,
    pub z_hat: f64,
    pub s0: f64,
    pub sz: f64,
    pub lambda_t: f64,
    pub init: (f64, f64),
}

#[derive(Parser, Debug)]
#[command(
    name = "trp",
    version,
    about = "Bayesian transfer learning with the total risk prior"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Gibbs sampler on a manifest's datasets.
    FitGibbs(GibbsArgs),
    /// Posterior mode by transformed coordinate descent and the penalty method.
    FitMap(MapArgs),
    /// Two-step Trans-Lasso fit.
    Translasso(TransLassoArgs),
    /// Held-out MSE benchmark over methods, K values and repetitions.
    Bench(BenchArgs),
    /// Fits on the two-cluster Simpson's paradox toy.
    DemoSimpson(SimpsonArgs),
    /// Naive block coordinate descent against the exact mode.
    DemoCdFailure,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PriorArg {
    Laplace,
    Gaussian,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum HyperArg {
    Slice,
    InverseGamma,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum StageArg {
    Lasso,
    Ridge,
}

#[derive(Args, Debug, Clone)]
struct ChainArgs {
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 5)]
    temps: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, value_enum, default_value_t = PriorArg::Laplace)]
    prior: PriorArg,
    #[arg(long, value_enum, default_value_t = HyperArg::Slice)]
    hyper: HyperArg,
    /// Hold tau fixed instead of sampling it.
    #[arg(long)]
    tau: Option<f64>,
}

impl ChainArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_iter: self.iters,
            n_burnin: self.burnin,
            thin: self.thin,
            n_temperatures: self.temps,
            prior_kind: match self.prior {
                PriorArg::Laplace => PriorKind::Laplace,
                PriorArg::Gaussian => PriorKind::Gaussian,
            },
            hyper_update_kind: match self.hyper {
                HyperArg::Slice => HyperUpdateKind::Slice,
                HyperArg::InverseGamma => HyperUpdateKind::InverseGamma,
            },
            seed,
            tau_fixed: self.tau,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct GibbsArgs {
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda_t: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_p: f64,
}

#[derive(Args, Debug)]
struct TransLassoArgs {
    #[arg(long, value_enum, default_value_t = StageArg::Lasso)]
    first_stage: StageArg,
    /// First-stage penalty; chosen by cross-validation when absent.
    #[arg(long, requires = "lambda2")]
    lambda1: Option<f64>,
    /// Correction penalty; chosen by cross-validation when absent.
    #[arg(long, requires = "lambda1")]
    lambda2: Option<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Use the synthetic sparse-transfer generator instead of a manifest.
    #[arg(long)]
    generator: bool,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2, 4, 8])]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "trp-gibbs,trp-map,trans-lasso,target-lasso,pooled-ols"
    )]
    methods: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Covariates of the generator.
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 50)]
    n_target: usize,
    #[arg(long, default_value_t = 100)]
    n_source_min: usize,
    #[arg(long, default_value_t = 200)]
    n_source_max: usize,
    #[arg(long, default_value_t = 3)]
    sparsity: usize,
    #[arg(long, default_value_t = 0.5)]
    contamination: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Make the first generated column an intercept.
    #[arg(long)]
    intercept: bool,
    /// Record wall time in the results; makes outputs run-dependent.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args, Debug)]
struct SimpsonArgs {
    #[arg(long, default_value_t = 50)]
    n_per_cluster: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 2_000)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    /// Prior precision of the hierarchical-mean baseline.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
}

/// Parses `argv` (program name first) and runs the command.
/// Returns the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = cli.common;
    std::fs::create_dir_all(&c.out)?;
    match cli.command {
        Command::FitGibbs(a) => fit_gibbs(&c, &a),
        Command::FitMap(a) => fit_map(&c, &a),
        Command::Translasso(a) => translasso(&c, &a),
        Command::Bench(a) => bench(&c, &a),
        Command::DemoSimpson(a) => demo_simpson(&c, &a),
        Command::DemoCdFailure => demo_cd_failure(&c),
    }
}

fn require_manifest(c: &Common) -> Result<Manifest> {
    let path = c
        .manifest
        .as_ref()
        .ok_or_else(|| TrpError::InvalidInput("this command needs --manifest <path>".into()))?;
    Manifest::load(path)
}

fn manifest_problem(c: &Common) -> Result<TransferProblem> {
    let m = require_manifest(c)?;
    let problem = m.load_problem()?;
    if m.standardize {
        trp::harness::Standardizer::fit(problem.target()).apply_problem(&problem)
    } else {
        Ok(problem)
    }
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Serialize)]
struct GibbsSummary {
    beta0_mean: Vec<f64>,
    eta_mean: Vec<f64>,
    sigma2_mean: f64,
    tau_mean: f64,
    n_draws: usize,
}

fn fit_gibbs(c: &Common, a: &GibbsArgs) -> Result<()> {
    let cfg = a.chain.config(c.seed);
    cfg.validate(1)?;
    let problem = manifest_problem(c)?;
    let draws = run_chain(&problem, &cfg)?;
    draws.write_csv(&c.out.join("draws.csv"))?;
    draws.write_sidecar(&c.out.join("draws.json"))?;
    let summary = GibbsSummary {
        beta0_mean: vec_of(&draws.beta_mean(0)?),
        eta_mean: vec_of(&draws.mean("eta")?),
        sigma2_mean: draws.mean("sigma2")?[0],
        tau_mean: draws.mean("tau")?[0],
        n_draws: draws.n_draws(),
    };
    write_json(&c.out.join("summary.json"), &summary)
}

#[derive(Serialize)]
struct MapReport<'a> {
    lambda_t: f64,
    tau: f64,
    lambda_p: f64,
    transformed_cd: &'a MapSolution,
    quadratic_penalty: &'a MapSolution,
}

fn fit_map(c: &Common, a: &MapArgs) -> Result<()> {
    let problem = manifest_problem(c)?;
    let mp = MapProblem::new(problem, a.lambda_t, a.tau, a.lambda_p)?;
    let cd = map_transformed_cd(&mp)?;
    let qp = map_quadratic_penalty(&mp, &PenaltyOptions::default())?;
    write_json(
        &c.out.join("map.json"),
        &MapReport {
            lambda_t: a.lambda_t,
            tau: a.tau,
            lambda_p: a.lambda_p,
            transformed_cd: &cd,
            quadratic_penalty: &qp,
        },
    )
}

#[derive(Serialize)]
struct TransLassoReport {
    first_stage: FirstStage,
    lambda1: f64,
    lambda2: f64,
    beta: Vec<f64>,
    cv_folds: Option<(Vec<usize>, Vec<usize>)>,
}

fn translasso(c: &Common, a: &TransLassoArgs) -> Result<()> {
    let problem = manifest_problem(c)?;
    let stage = match a.first_stage {
        StageArg::Lasso => FirstStage::Lasso,
        StageArg::Ridge => FirstStage::Ridge,
    };
    let report = match (a.lambda1, a.lambda2) {
        (Some(l1), Some(l2)) => TransLassoReport {
            first_stage: stage,
            lambda1: l1,
            lambda2: l2,
            beta: vec_of(&baselines::trans_lasso(&problem, stage, l1, l2)?),
            cv_folds: None,
        },
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let fit = baselines::trans_lasso_cv(&problem, stage, a.folds, &mut rng)?;
            TransLassoReport {
                first_stage: stage,
                lambda1: fit.first.lambda,
                lambda2: fit.second.lambda,
                beta: vec_of(&fit.beta),
                cv_folds: Some((fit.first.folds.clone(), fit.second.folds.clone())),
            }
        }
    };
    write_json(&c.out.join("translasso.json"), &report)
}

#[derive(Serialize)]
struct BenchMeta<'a> {
    config: &'a BenchConfig,
    failures: &'a [trp::harness::bench::Failure],
    medians: Vec<(String, usize, Option<f64>)>,
    notes: &'a str,
}

fn bench(c: &Common, a: &BenchArgs) -> Result<()> {
    let source = if let Some(path) = &c.manifest {
        DataSource::Manifest(Manifest::load(path)?)
    } else if a.generator {
        DataSource::Generator(SparseTransferSpec {
            seed: c.seed,
            p: a.p,
            k: a.k.first().copied().unwrap_or(1),
            n_target: a.n_target,
            n_source_range: (a.n_source_min, a.n_source_max),
            sparsity: a.sparsity,
            contamination: a.contamination,
            noise_sd: a.noise,
            intercept: a.intercept,
            ..SparseTransferSpec::default()
        })
    } else {
        return Err(TrpError::InvalidInput(
            "bench needs --manifest <path> or --generator".into(),
        ));
    };
    let methods = a
        .methods
        .iter()
        .map(|m| Method::parse(m.trim()))
        .collect::<Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        source,
        k_values: a.k.clone(),
        n_reps: a.reps,
        methods: methods.clone(),
        holdout_fraction: a.holdout,
        seed: c.seed,
        sampler: a.chain.config(c.seed),
        map: MapMethodConfig::default(),
        n_folds: a.folds,
        timing: a.timing,
    };
    let out = run_benchmark(&cfg)?;
    write_results(&c.out.join("results.csv"), &out.results)?;
    let mut medians = Vec::new();
    for &k in &cfg.k_values {
        for m in &methods {
            medians.push((
                m.name().to_string(),
                k,
                median_mse(&out.results, m.name(), k),
            ));
        }
    }
    let notes = if matches!(cfg.source, DataSource::Generator(_)) {
        if a.intercept {
            "synthetic generator; first column is an intercept; no standardization"
        } else {
            "synthetic generator; no intercept column; no standardization"
        }
    } else {
        "manifest data; standardization as given by the manifest"
    };
    write_json(
        &c.out.join("bench.json"),
        &BenchMeta {
            config: &cfg,
            failures: &out.failures,
            medians,
            notes,
        },
    )
}

#[derive(Serialize)]
struct SimpsonReport {
    source_ols: Vec<Vec<f64>>,
    pooled_source_fit: Vec<f64>,
    transfer_of_source_ols: Vec<f64>,
    target_ols: Vec<f64>,
    hierarchical: Vec<f64>,
    trp_posterior_mean: Vec<f64>,
    holdout_mse: SimpsonMse,
}

#[derive(Serialize)]
struct SimpsonMse {
    target_ols: f64,
    hierarchical: f64,
    trp: f64,
}

/// Fits the Simpson toy; shared with the acceptance tests.
pub fn simpson_fit(
    seed: u64,
    n_per_cluster: usize,
    noise: f64,
    iters: usize,
    burnin: usize,
    kappa: f64,
) -> Result<(SimpsonOutcome, trp::harness::SimpsonData)> {
    let data = gen_simpsons(seed, n_per_cluster, noise)?;
    let problem = &data.problem;
    let cfg = SamplerConfig {
        n_iter: iters,
        n_burnin: burnin,
        seed,
        ..SamplerConfig::default()
    };
    let trp_mean = run_chain(problem, &cfg)?.beta_mean(0)?;
    let ols = baselines::ols(problem.target())?;
    let hier = baselines::hierarchical_mean_prior(problem, kappa)?;
    let h = &data.holdout;
    let mse = |b: &DVector<f64>| h.residual_sq(b) / h.n() as f64;
    Ok((
        SimpsonOutcome {
            mse_target_ols: mse(&ols),
            mse_hierarchical: mse(&hier),
            mse_trp: mse(&trp_mean),
            target_ols: ols,
            hierarchical: hier,
            trp: trp_mean,
        },
        data,
    ))
}

#[derive(Clone, Debug)]
pub struct SimpsonOutcome {
    pub target_ols: DVector<f64>,
    pub hierarchical: DVector<f64>,
    pub trp: DVector<f64>,
    pub mse_target_ols: f64,
    pub mse_hierarchical: f64,
    pub mse_trp: f64,
}

fn demo_simpson(c: &Common, a: &SimpsonArgs) -> Result<()> {
    let (fit, data) = simpson_fit(c.seed, a.n_per_cluster, a.noise, a.iters, a.burnin, a.kappa)?;
    let problem = &data.problem;
    write_dataset(&c.out.join("simpson_target.csv"), problem.target())?;
    for (k, s) in problem.sources().iter().enumerate() {
        write_dataset(&c.out.join(format!("simpson_source{}.csv", k + 1)), s)?;
    }
    write_dataset(&c.out.join("simpson_holdout.csv"), &data.holdout)?;
    let p = problem.p();
    let beta_s = per_source_ols(problem)?;
    let tm = build_transfer_matrix(problem, &vec![true; problem.k()], 0.0)?;
    let report = SimpsonReport {
        source_ols: (0..problem.k())
            .map(|k| beta_s.rows(k * p, p).iter().copied().collect())
            .collect(),
        pooled_source_fit: vec_of(&baselines::ols(&trp::transfer::Dataset::concat(
            problem.sources().iter(),
        )?)?),
        transfer_of_source_ols: vec_of(&tm.apply_t(&beta_s)),
        target_ols: vec_of(&fit.target_ols),
        hierarchical: vec_of(&fit.hierarchical),
        trp_posterior_mean: vec_of(&fit.trp),
        holdout_mse: SimpsonMse {
            target_ols: fit.mse_target_ols,
            hierarchical: fit.mse_hierarchical,
            trp: fit.mse_trp,
        },
    };
    write_json(&c.out.join("simpson.json"), &report)
}

#[derive(Serialize)]
struct CdReport<'a> {
    parameters: CdDemo,
    optimum: (f64, f64),
    optimum_objective: f64,
    naive_final: (f64, f64),
    naive_final_objective: f64,
    naive_gap: f64,
    transformed_cd: &'a MapSolution,
    quadratic_penalty: &'a MapSolution,
}

/// Trajectory rows `(step, beta0, z, objective)` of the naive scheme.
pub fn cd_demo_trajectory(d: &CdDemo, max_sweeps: usize) -> Result<Vec<(usize, f64, f64, f64)>> {
    let mp = MapProblem::univariate(d.beta0_hat, d.z_hat, d.s0, d.sz, d.lambda_t)?;
    let one = |v: f64| DVector::from_element(1, v);
    let traj = naive_block_cd(&mp, (one(d.init.0), one(d.init.1)), max_sweeps)?;
    Ok(traj
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let (b, z) = (it.beta0[0], it.z[0]);
            (
                i,
                b,
                z,
                univariate_objective(b, z, d.beta0_hat, d.z_hat, d.s0, d.sz, d.lambda_t),
            )
        })
        .collect())
}

fn demo_cd_failure(c: &Common) -> Result<()> {
    let d = CD_DEMO;
    let traj = cd_demo_trajectory(&d, 100)?;
    let path = c.out.join("cd_trajectory.csv");
    write_trajectory(&path, &traj)?;
    let opt = map_univariate(d.beta0_hat, d.z_hat, d.s0, d.sz, d.lambda_t);
    let f_opt = univariate_objective(opt.0, opt.1, d.beta0_hat, d.z_hat, d.s0, d.sz, d.lambda_t);
    let last = traj
        .last()
        .copied()
        .unwrap_or((0, d.init.0, d.init.1, f64::NAN));
    let mp = MapProblem::univariate(d.beta0_hat, d.z_hat, d.s0, d.sz, d.lambda_t)?;
    let cd = map_transformed_cd(&mp)?;
    let qp = map_quadratic_penalty(&mp, &PenaltyOptions::default())?;
    write_json(
        &c.out.join("cd_optimum.json"),
        &CdReport {
            parameters: d,
            optimum: opt,
            optimum_objective: f_opt,
            naive_final: (last.1, last.2),
            naive_final_objective: last.3,
            naive_gap: last.3 - f_opt,
            transformed_cd: &cd,
            quadratic_penalty: &qp,
        },
    )
}

fn write_trajectory(path: &Path, traj: &[(usize, f64, f64, f64)]) -> Result<()> {
    let mut text = String::from("step,beta0,z,objective\n");
    for (i, b, z, f) in traj {
        text.push_str(&format!("{i},{b},{z},{f}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}
