//! Metropolis-within-Gibbs posterior sampling for IW-AR(1) volatility.
//!
//! Each iteration runs, in order: the VAR coefficient draw (when the
//! observations follow a VAR), the latent `z_{1:T}` draw, the `(F, S)` move,
//! a filter rebuild, and the path moves (global FFBS, innovations sweep,
//! `Σ_T`).

pub mod elicit;
pub mod ffbs;
pub mod hyper;
pub mod latent;
pub mod moves;

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::{forward_filter, AugmentedObs, DofSchedule, FilterCache};
use crate::iwar::{reverse_params, ModelParams, VarPath};
use crate::matcore::{Mat, SymMatrix, Vector};
use crate::svmodel::{residuals, sample_a, CoeffPrior, VarCoeffs};

pub use elicit::{default_hyper_config, elicit, Elicited};
pub use ffbs::{
    backward_sample_path, loglik_terms, mh_accept, prior_logpdf_reverse, prior_logpdf_reverse_terms, proposal_logpdf,
    proposal_logpdf_terms, rebuild_path, reverse_to_forward, LogTerms, PathDraw, PathTerms,
};
pub use hyper::{
    hyper_log_target, hyper_mh_step, s_from_rho_v, v_from_rho_s, HyperConfig, HyperMode, HyperMove, HyperPrior,
    HyperProposal, HyperValue,
};
pub use latent::{sample_z, ZConditional};
pub use moves::{global_mh_step, innovations_mh_sweep, local_candidate, sigma_t_mh_step, LocalCandidate, LocalChange};

/// Accept and reject counts of one move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveTally {
    pub accepted: u64,
    pub rejected: u64,
}

impl MoveTally {
    pub fn record(&mut self, accepted: bool) {
        if accepted {
            self.accepted += 1;
        } else {
            self.rejected += 1;
        }
    }

    pub fn proposed(&self) -> u64 {
        self.accepted + self.rejected
    }

    pub fn rate(&self) -> f64 {
        match self.proposed() {
            0 => 0.0,
            p => self.accepted as f64 / p as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptCounters {
    pub global: MoveTally,
    pub innovations: MoveTally,
    pub sigma_t: MoveTally,
    pub hyper: MoveTally,
    /// Hyper proposals that did not define a stationary model (counted as
    /// rejections in `hyper` too).
    pub hyper_invalid: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Fixed degrees-of-freedom parameter `n`.
    pub n: f64,
    /// Filter schedule `r_t = decay r_{t-1} + offset` from `r_0 = n + 2`.
    pub schedule_decay: f64,
    pub schedule_offset: f64,
    /// Truncation threshold of the innovations sampler; 0 propagates fully.
    pub epsilon: f64,
    pub hyper: HyperConfig,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    pub global_move: bool,
    pub innovations_move: bool,
    /// Innovations sweeps per iteration.
    pub sweeps: usize,
    pub sigma_t_move: bool,
    /// Keep thinned post-burn-in paths.
    pub keep_paths: bool,
}

impl SamplerConfig {
    /// Default sampler settings around a hyperparameter configuration.
    pub fn new(n: f64, hyper: HyperConfig) -> Self {
        SamplerConfig {
            n,
            schedule_decay: 0.98,
            schedule_offset: 1.0,
            epsilon: 1e-4,
            hyper,
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            chains: 1,
            seed: 0,
            global_move: true,
            innovations_move: true,
            sweeps: 1,
            sigma_t_move: true,
            keep_paths: true,
        }
    }

    pub fn schedule(&self) -> Result<DofSchedule> {
        DofSchedule::for_model(self.n, self.schedule_decay, self.schedule_offset)
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if !(self.n > 0.0) || !self.n.is_finite() {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        if self.thin == 0 || self.chains == 0 {
            return Err(Error::Config("thin and chains must be at least 1".into()));
        }
        self.schedule().map_err(|e| Error::Config(alloc::format!("{e}")))?;
        self.hyper.validate(q)
    }
}

/// Observations: `ξ_{1-r:T}` with an optional VAR(r) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainData {
    pub xi: Vec<Vector>,
    pub var_prior: Option<CoeffPrior>,
}

impl ChainData {
    pub fn direct(xs: Vec<Vector>) -> Self {
        ChainData { xi: xs, var_prior: None }
    }

    pub fn dim(&self) -> usize {
        self.xi.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn lags(&self) -> usize {
        match &self.var_prior {
            Some(p) if self.dim() > 0 => p.mean().len() / self.dim(),
            _ => 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.xi.len().saturating_sub(self.lags())
    }

    fn validate(&self) -> Result<()> {
        let q = self.dim();
        if q == 0 {
            return Err(Error::Config("no observations".into()));
        }
        if let Some(p) = &self.var_prior {
            if p.mean().len() % q != 0 {
                return Err(Error::Config("coefficient prior length must be a multiple of q".into()));
            }
        }
        if self.horizon() == 0 {
            return Err(Error::Config("no observations after the presample".into()));
        }
        if self.xi.iter().any(|v| v.len() != q || v.iter().any(|a| !a.is_finite())) {
            return Err(Error::Config("observations must be finite q-vectors".into()));
        }
        Ok(())
    }
}

/// One chain's current state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub(crate) z: Vec<Vector>,
    pub(crate) x: Vec<Vector>,
    pub(crate) draw: PathDraw,
    pub(crate) params: ModelParams,
    pub(crate) rev_params: ModelParams,
    pub(crate) hyper: HyperValue,
    pub(crate) coeffs: Option<VarCoeffs>,
    pub(crate) counters: AcceptCounters,
    pub(crate) terms: PathTerms,
}

impl ChainState {
    /// Assembles a state and evaluates its cached terms under `cache`.
    pub fn new(
        z: Vec<Vector>,
        x: Vec<Vector>,
        draw: PathDraw,
        params: ModelParams,
        hyper: HyperValue,
        coeffs: Option<VarCoeffs>,
        cache: &FilterCache,
    ) -> Result<Self> {
        let rev_params = reverse_params(&params)?;
        let terms = PathTerms::evaluate(&draw, &z, &x, &params, &rev_params, cache)?;
        Ok(ChainState { z, x, draw, params, rev_params, hyper, coeffs, counters: AcceptCounters::default(), terms })
    }

    pub fn z(&self) -> &[Vector] {
        &self.z
    }

    pub fn x(&self) -> &[Vector] {
        &self.x
    }

    pub fn path(&self) -> &VarPath {
        &self.draw.path
    }

    pub fn rev_innovations(&self) -> &[crate::iwar::Innovations] {
        &self.draw.rev
    }

    pub fn fwd_innovations(&self) -> &[crate::iwar::Innovations] {
        &self.draw.fwd
    }

    pub fn draw(&self) -> &PathDraw {
        &self.draw
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn hyper(&self) -> &HyperValue {
        &self.hyper
    }

    pub fn coeffs(&self) -> Option<&VarCoeffs> {
        self.coeffs.as_ref()
    }

    pub fn counters(&self) -> &AcceptCounters {
        &self.counters
    }

    pub fn terms(&self) -> &PathTerms {
        &self.terms
    }

    /// Augmented observations `(z_t, x_t)` for the filter.
    pub fn observations(&self) -> Result<Vec<AugmentedObs>> {
        self.z.iter().zip(&self.x).map(|(z, x)| AugmentedObs::new(z.clone(), x.clone())).collect()
    }

    /// Rebuilds the filter under the current state.
    pub fn filter(&self, schedule: &DofSchedule) -> Result<FilterCache> {
        forward_filter(&self.params, &self.observations()?, schedule)
    }

    /// Re-evaluates every cached term (after `z`, `x` or the model change).
    pub fn refresh_terms(&mut self, cache: &FilterCache) -> Result<()> {
        self.terms = PathTerms::evaluate(&self.draw, &self.z, &self.x, &self.params, &self.rev_params, cache)?;
        Ok(())
    }

    /// Largest reconstruction residual of the stored path.
    pub fn reconstruction_residual(&self) -> f64 {
        self.draw.reconstruction_residual()
    }

    /// Replaces the model, keeping the path.
    pub fn set_model(&mut self, value: HyperValue, params: ModelParams) -> Result<()> {
        self.rev_params = reverse_params(&params)?;
        self.params = params;
        self.hyper = value;
        Ok(())
    }

    /// Redraws every `z_t` from its Gaussian full conditional.
    pub fn resample_z<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for t in 1..=self.draw.horizon() {
            let fwd = &self.draw.fwd[t - 1];
            self.z[t - 1] = sample_z(&self.x[t - 1], &fwd.ups, &fwd.psi, self.draw.path.get(t - 1), rng)?;
        }
        Ok(())
    }
}

/// `(F, S)` and VAR coefficients after one iteration (0 is the start).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperDraw {
    pub iteration: usize,
    pub f: Mat,
    pub s: SymMatrix,
    pub coeffs: Option<VarCoeffs>,
}

impl HyperDraw {
    fn of(iteration: usize, state: &ChainState) -> Self {
        HyperDraw { iteration, f: state.params.f().clone(), s: state.params.s().clone(), coeffs: state.coeffs.clone() }
    }
}

/// An error that stopped a chain before its last iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainAbort {
    pub iteration: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<HyperDraw>,
    /// Thinned post-burn-in paths with their iteration numbers.
    pub paths: Vec<(usize, VarPath)>,
    pub counters: AcceptCounters,
    pub abort: Option<ChainAbort>,
    pub state: ChainState,
}

/// Draws `z_t ~ N(0, S)`, runs the filter and accepts one backward draw.
pub fn initialize<R: Rng + ?Sized>(data: &ChainData, config: &SamplerConfig, rng: &mut R) -> Result<ChainState> {
    data.validate()?;
    let q = data.dim();
    config.validate(q)?;
    let schedule = config.schedule()?;
    let hyper = config.hyper.initial_value();
    let params = config.hyper.params(config.n, &hyper).map_err(|e| Error::Config(alloc::format!("{e}")))?;
    let coeffs = data.var_prior.as_ref().map(|p| VarCoeffs::from_stacked(data.lags(), q, p.mean())).transpose()?;
    let x = match &coeffs {
        Some(c) => residuals(&data.xi, c)?,
        None => data.xi.clone(),
    };
    let sc = params.s_chol().clone();
    let zero = Vector::zeros(q);
    let z: Vec<Vector> = (0..x.len()).map(|_| crate::matcore::mvn_sample(&zero, &sc, rng)).collect();
    let ys = z.iter().zip(&x).map(|(z, x)| AugmentedObs::new(z.clone(), x.clone())).collect::<Result<Vec<_>>>()?;
    let cache = forward_filter(&params, &ys, &schedule)?;
    let draw = backward_sample_path(&cache, rng)?;
    ChainState::new(z, x, draw, params, hyper, coeffs, &cache)
}

/// One sampler iteration; `burn_in` enables proposal adaptation.
pub fn iterate<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &ChainData,
    config: &mut SamplerConfig,
    schedule: &DofSchedule,
    burn_in: bool,
    rng: &mut R,
) -> Result<()> {
    if let Some(prior) = &data.var_prior {
        let c = sample_a(&data.xi, &state.draw.path, prior, rng)?;
        state.x = residuals(&data.xi, &c)?;
        state.coeffs = Some(c);
    }
    state.resample_z(rng)?;
    match hyper_mh_step(&config.hyper, config.n, &state.hyper, &state.params, &state.x, &state.z, schedule, rng)? {
        HyperMove::Accepted { value, params } => {
            state.set_model(value, params)?;
            if burn_in && config.hyper.adapt {
                config.hyper.recenter(&state.hyper);
            }
            state.counters.hyper.record(true);
        }
        HyperMove::Rejected => {
            if !matches!(config.hyper.mode, HyperMode::Fixed { .. }) {
                state.counters.hyper.record(false);
            }
        }
        HyperMove::Invalid => {
            state.counters.hyper.record(false);
            state.counters.hyper_invalid += 1;
        }
    }
    let cache = state.filter(schedule)?;
    state.refresh_terms(&cache)?;
    if config.global_move {
        global_mh_step(state, &cache, rng)?;
    }
    if config.innovations_move {
        for _ in 0..config.sweeps {
            innovations_mh_sweep(state, &cache, config.epsilon, rng)?;
        }
    }
    if config.sigma_t_move {
        sigma_t_mh_step(state, &cache, config.epsilon, rng)?;
    }
    Ok(())
}

/// Runs one chain: initialization, then `iterations` sweeps. A numeric
/// failure mid-run stops the chain and is reported in `abort`.
pub fn run_chain<R: Rng + ?Sized>(data: &ChainData, config: &SamplerConfig, rng: &mut R) -> Result<ChainOutput> {
    let mut state = initialize(data, config, rng)?;
    let schedule = config.schedule()?;
    let mut cfg = config.clone();
    let mut draws = Vec::with_capacity(config.iterations + 1);
    let mut paths = Vec::new();
    draws.push(HyperDraw::of(0, &state));
    if config.keep_paths && config.iterations == 0 {
        paths.push((0, state.draw.path.clone()));
    }
    let mut abort = None;
    for it in 1..=config.iterations {
        if let Err(error) = iterate(&mut state, data, &mut cfg, &schedule, it <= config.burn_in, rng) {
            abort = Some(ChainAbort { iteration: it, error });
            break;
        }
        draws.push(HyperDraw::of(it, &state));
        if config.keep_paths && it > config.burn_in && (it - config.burn_in) % config.thin == 0 {
            paths.push((it, state.draw.path.clone()));
        }
    }
    Ok(ChainOutput { draws, paths, counters: state.counters, abort, state })
}
