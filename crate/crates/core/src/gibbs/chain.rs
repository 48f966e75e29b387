use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TrpError};
use crate::gibbs::conditionals::{
    sample_beta_a, sample_lambda_p, sample_lambda_t, sample_omega, sample_rho, sample_sigma2,
    TauSampler,
};
use crate::gibbs::config::{PriorKind, SamplerConfig};
use crate::gibbs::draws::{ParamLayout, PosteriorDraws};
use crate::gibbs::state::ModelState;
use crate::gibbs::tempering::{inverse_temperatures, sample_eta_tempered, SwapStats};
use crate::transfer::TransferProblem;

#[derive(Clone, Copy, Debug)]
enum Stream {
    Beta,
    Sigma,
    Omega,
    LambdaT,
    LambdaP,
    Eta,
    Rho,
    Tau,
}

const N_STREAMS: usize = 8;

fn stream_rngs(seed: u64) -> Vec<ChaCha8Rng> {
    (0..N_STREAMS)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect()
}

/// The systematic-scan sampler with its random streams and adaptation state.
///
/// Each update block draws from its own stream, so switching one block off
/// leaves the random numbers seen by the others unchanged.
#[derive(Clone, Debug)]
pub struct GibbsChain {
    pub state: ModelState,
    pub replicas: Vec<Vec<bool>>,
    pub tau_sampler: TauSampler,
    pub swap_stats: SwapStats,
    pub iteration: usize,
    config: SamplerConfig,
    inv_temps: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
}

impl GibbsChain {
    pub fn new(problem: &TransferProblem, config: &SamplerConfig) -> Result<Self> {
        let state = ModelState::initial(problem, config)?;
        Self::with_state(problem, config, state)
    }

    pub fn with_state(
        problem: &TransferProblem,
        config: &SamplerConfig,
        state: ModelState,
    ) -> Result<Self> {
        config.validate(problem.k())?;
        if state.p() != problem.p() || state.k() != problem.k() {
            return Err(TrpError::Dimension(format!(
                "state has P = {}, K = {}; problem has P = {}, K = {}",
                state.p(),
                state.k(),
                problem.p(),
                problem.k()
            )));
        }
        if config.prior_kind == PriorKind::Laplace
            && !config.fixed.omega
            && config.fixed.lambda_t == Some(0.0)
        {
            return Err(TrpError::InvalidInput(
                "the Laplace prior with free mixing scales needs lambda_t > 0".into(),
            ));
        }
        state.check_invariants()?;
        let l = config.n_temperatures;
        Ok(GibbsChain {
            replicas: vec![state.eta.clone(); l],
            state,
            tau_sampler: TauSampler::new(config.tau_proposal_sd, config.mh_target_accept),
            swap_stats: SwapStats::new(l),
            iteration: 0,
            inv_temps: inverse_temperatures(l, config.temperature_spacing),
            rngs: stream_rngs(config.seed),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    fn rng(&mut self, s: Stream) -> &mut ChaCha8Rng {
        &mut self.rngs[s as usize]
    }

    /// One full scan; errors carry the iteration index.
    pub fn sweep(&mut self, problem: &TransferProblem) -> Result<()> {
        let it = self.iteration;
        self.sweep_inner(problem).map_err(|e| e.at_iteration(it))?;
        self.iteration += 1;
        Ok(())
    }

    fn sweep_inner(&mut self, problem: &TransferProblem) -> Result<()> {
        let cfg = self.config.clone();
        let fixed = &cfg.fixed;

        let beta = sample_beta_a(&self.state.clone(), problem, self.rng(Stream::Beta))?;
        self.state.beta_a = beta;

        if fixed.sigma2.is_none() {
            let s2 = sample_sigma2(
                &self.state.clone(),
                problem,
                &cfg.sigma2_prior,
                self.rng(Stream::Sigma),
            )?;
            self.state.sigma2 = s2;
        }

        if !fixed.omega {
            let om = sample_omega(
                &self.state.clone(),
                problem,
                cfg.prior_kind,
                self.rng(Stream::Omega),
            )?;
            self.state.omega = om;
        }

        if fixed.lambda_t.is_none() {
            let (lt, at) = sample_lambda_t(&self.state.clone(), &cfg, self.rng(Stream::LambdaT))?;
            self.state.lambda_t = lt;
            self.state.a_t = at;
        }

        if fixed.lambda_p.is_none() {
            let (lp, ap) = sample_lambda_p(
                &self.state.clone(),
                problem,
                &cfg,
                self.rng(Stream::LambdaP),
            )?;
            self.state.lambda_p = lp;
            self.state.a_p = ap;
        }

        if fixed.eta.is_none() {
            let state = self.state.clone();
            let mut replicas = std::mem::take(&mut self.replicas);
            let mut stats = std::mem::take(&mut self.swap_stats);
            let inv_temps = self.inv_temps.clone();
            let out = sample_eta_tempered(
                &mut replicas,
                &inv_temps,
                &state,
                problem,
                self.rng(Stream::Eta),
                &mut stats,
            );
            self.replicas = replicas;
            self.swap_stats = stats;
            out?;
            self.state.eta = self.replicas[0].clone();
        }

        let rho = sample_rho(&self.state.clone(), self.rng(Stream::Rho))?;
        self.state.rho = rho;

        if cfg.tau_fixed.is_none() {
            let adapt = if self.iteration < cfg.n_burnin {
                1.0 / ((self.iteration + 1) as f64).powf(0.6)
            } else {
                0.0
            };
            let state = self.state.clone();
            let mut ts = self.tau_sampler.clone();
            let out = ts.step(&state, problem, self.rng(Stream::Tau), adapt);
            self.tau_sampler = ts;
            let (tau, _) = out?;
            self.state.tau = tau;
        }

        self.state.check_invariants()
    }
}

/// Runs the sampler and keeps every `thin`-th draw after burn-in.
pub fn run_chain(problem: &TransferProblem, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let mut chain = GibbsChain::new(problem, config)?;
    let layout = ParamLayout::new(problem.p(), problem.k());
    let mut rows = Vec::with_capacity(config.n_retained());
    for it in 0..config.n_iter {
        if it == config.n_burnin {
            chain.tau_sampler.proposed = 0;
            chain.tau_sampler.accepted = 0;
            chain.swap_stats = SwapStats::new(config.n_temperatures);
        }
        chain.sweep(problem)?;
        if it >= config.n_burnin && (it - config.n_burnin) % config.thin == config.thin - 1 {
            rows.push(layout.flatten(&chain.state));
        }
    }
    let mut acc = BTreeMap::new();
    if config.tau_fixed.is_none() {
        acc.insert("tau".to_string(), chain.tau_sampler.acceptance_rate());
    }
    Ok(PosteriorDraws::new(
        layout,
        &rows,
        config.clone(),
        acc,
        chain.swap_stats.clone(),
    ))
}
