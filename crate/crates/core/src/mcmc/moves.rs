//! Path moves on a [`ChainState`]: the global FFBS independence move, the
//! per-step innovations sampler and the `Σ_T` move.
//!
//! A local move changes one reverse pair `θ_t` (or `Σ_T`) and propagates the
//! change down the path. Propagation halts at the first `j >= 1` where
//! `‖Σ*_j - Σ_j‖_F < ε` and `Ψ̃_j := Σ_{j-1} - Υ̃_j Σ*_j Υ̃_j'` is positive
//! definite; `Σ_{0:j-1}` is then left untouched and the likelihood factors
//! `j+1..t` enter the ratio. With `ε = 0` the change reaches `Σ_0` and the
//! ratio is exact.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::Rng;

use super::ffbs::{
    backward_sample_path, mh_accept, prior_sigma_term, prior_step_term, proposal_sigma_term, proposal_step_term,
    step_likelihood, PathTerms,
};
use super::ChainState;
use crate::error::{Error, Result};
use crate::filter::FilterCache;
use crate::iwar::{Direction, Innovations};
use crate::matcore::{matnorm_sample_factored, SymMatrix, DEFAULT_PD_TOL};

/// What a local move replaces.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalChange {
    /// `θ_t = (Υ̃_t, Ψ̃_t)`, 1-based `t`.
    Theta { t: usize, inn: Innovations },
    SigmaT(SymMatrix),
}

/// A fully evaluated local proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCandidate {
    change: LocalChange,
    /// Lowest path index that changes.
    pub stop: usize,
    top: usize,
    sigmas: Vec<SymMatrix>,
    repaired: Option<SymMatrix>,
    lo: usize,
    fwd: Vec<Innovations>,
    lik: Vec<f64>,
    prior: f64,
    proposal: f64,
    pub log_ratio: f64,
}

fn is_rejection(e: &Error) -> bool {
    matches!(e, Error::NotPositiveDefinite | Error::ProposalInvalid)
}

/// Evaluates the truncated proposal and its log MH ratio.
pub fn local_candidate(state: &ChainState, cache: &FilterCache, change: LocalChange, eps: f64) -> Result<LocalCandidate> {
    let horizon = state.draw.horizon();
    let path = state.draw.path.mats();
    let rev = &state.draw.rev;
    let (top, first, check_top) = match &change {
        LocalChange::Theta { t, inn } => {
            if *t == 0 || *t > horizon {
                return Err(Error::IndexError);
            }
            (t - 1, inn.apply(&path[*t]), true)
        }
        LocalChange::SigmaT(s) => (horizon, s.clone(), false),
    };
    let mut down = alloc::vec![first];
    let mut j = top;
    let mut repaired = None;
    loop {
        let cur = down.last().expect("non-empty");
        if !cur.is_pd(DEFAULT_PD_TOL) {
            return Err(Error::NotPositiveDefinite);
        }
        if j == 0 {
            break;
        }
        if (j < top || check_top) && (cur.as_mat() - path[j].as_mat()).norm() < eps {
            let psi = &path[j - 1] - &cur.congruence(&rev[j - 1].ups);
            if psi.is_pd(DEFAULT_PD_TOL) {
                repaired = Some(psi);
                break;
            }
        }
        let next = rev[j - 1].apply(cur);
        down.push(next);
        j -= 1;
    }
    let stop = j;
    down.reverse();
    let sigma = |k: usize| if k >= stop && k <= top { &down[k - stop] } else { &path[k] };
    let lo = stop.max(1);
    let hi = (top + 1).min(horizon);
    let mut fwd = Vec::with_capacity(hi + 1 - lo);
    let mut lik = Vec::with_capacity(hi + 1 - lo);
    let mut log_ratio = 0.0;
    for tau in lo..=hi {
        let ups = match &change {
            LocalChange::Theta { t, inn } if *t == tau => &inn.ups,
            _ => &rev[tau - 1].ups,
        };
        let (f, ll) = step_likelihood(&state.z[tau - 1], &state.x[tau - 1], sigma(tau - 1), sigma(tau), ups)?;
        if tau > stop {
            log_ratio += ll - state.terms.lik[tau - 1];
        }
        fwd.push(f);
        lik.push(ll);
    }
    let (prior, proposal) = match &change {
        LocalChange::Theta { t, inn } => {
            let p = prior_step_term(&state.rev_params, inn)?;
            let q = proposal_step_term(cache, *t, inn)?;
            log_ratio += (p - state.terms.prior.steps[t - 1]) - (q - state.terms.proposal.steps[t - 1]);
            (p, q)
        }
        LocalChange::SigmaT(s) => {
            let p = prior_sigma_term(&state.params, s)?;
            let q = proposal_sigma_term(cache, s)?;
            log_ratio += (p - state.terms.prior.sigma) - (q - state.terms.proposal.sigma);
            (p, q)
        }
    };
    Ok(LocalCandidate { change, stop, top, sigmas: down, repaired, lo, fwd, lik, prior, proposal, log_ratio })
}

/// Writes an accepted candidate into the state and refreshes the cached
/// terms of every index it touched.
pub fn apply_candidate(state: &mut ChainState, cache: &FilterCache, cand: LocalCandidate) -> Result<()> {
    let LocalCandidate { change, stop, top, sigmas, repaired, lo, fwd, lik, prior, proposal, .. } = cand;
    debug_assert_eq!(sigmas.len(), top + 1 - stop);
    {
        let mats = state.draw.path.mats_mut();
        for (k, s) in sigmas.into_iter().enumerate() {
            mats[stop + k] = s;
        }
    }
    match change {
        LocalChange::Theta { t, inn } => {
            state.draw.rev[t - 1] = inn;
            state.terms.prior.steps[t - 1] = prior;
            state.terms.proposal.steps[t - 1] = proposal;
        }
        LocalChange::SigmaT(_) => {
            state.terms.prior.sigma = prior;
            state.terms.proposal.sigma = proposal;
        }
    }
    if let Some(psi) = repaired {
        let inn = &mut state.draw.rev[stop - 1];
        inn.psi = psi;
        state.terms.prior.steps[stop - 1] = prior_step_term(&state.rev_params, inn)?;
        state.terms.proposal.steps[stop - 1] = proposal_step_term(cache, stop, inn)?;
    }
    for (k, (f, ll)) in fwd.into_iter().zip(lik).enumerate() {
        state.draw.fwd[lo + k - 1] = f;
        state.terms.lik[lo + k - 1] = ll;
    }
    Ok(())
}

/// Draws `θ*_t ~ q_t`.
pub fn propose_theta<R: Rng + ?Sized>(cache: &FilterCache, t: usize, rng: &mut R) -> Result<Innovations> {
    let st = cache.step(t);
    let psi = st.rev_psi_law().sample(rng)?;
    let pc = psi.cholesky(DEFAULT_PD_TOL)?;
    let ups = matnorm_sample_factored(st.rev_ups_mean(), &pc, st.rev_ups_col_chol(), rng);
    Ok(Innovations { ups, psi, direction: Direction::Reverse })
}

fn local_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    cache: &FilterCache,
    change: LocalChange,
    eps: f64,
    rng: &mut R,
) -> Result<bool> {
    let u: f64 = rng.random();
    let cand = match local_candidate(state, cache, change, eps) {
        Ok(c) => c,
        Err(e) if is_rejection(&e) => return Ok(false),
        Err(e) => return Err(e),
    };
    if mh_accept(cand.log_ratio, u) {
        apply_candidate(state, cache, cand)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// One pass of the innovations sampler over `t = T..1`.
pub fn innovations_mh_sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    cache: &FilterCache,
    eps: f64,
    rng: &mut R,
) -> Result<()> {
    for t in (1..=state.draw.horizon()).rev() {
        let accepted = match propose_theta(cache, t, rng) {
            Ok(inn) => local_step(state, cache, LocalChange::Theta { t, inn }, eps, rng)?,
            Err(e) if is_rejection(&e) => false,
            Err(e) => return Err(e),
        };
        state.counters.innovations.record(accepted);
    }
    Ok(())
}

/// Independence move on `Σ_T` with proposal `IW(r_T + 1, G22_T)`.
pub fn sigma_t_mh_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    cache: &FilterCache,
    eps: f64,
    rng: &mut R,
) -> Result<bool> {
    let accepted = match cache.step(cache.horizon()).sigma_law().sample(rng) {
        Ok(s) => local_step(state, cache, LocalChange::SigmaT(s), eps, rng)?,
        Err(e) if is_rejection(&e) => false,
        Err(e) => return Err(e),
    };
    state.counters.sigma_t.record(accepted);
    Ok(accepted)
}

/// Global independence move: a full FFBS path accepted with ratio
/// `r(Δ*) / r(Δ)`.
pub fn global_mh_step<R: Rng + ?Sized>(state: &mut ChainState, cache: &FilterCache, rng: &mut R) -> Result<bool> {
    let draw = match backward_sample_path(cache, rng) {
        Ok(d) => d,
        Err(e) if is_rejection(&e) => {
            state.counters.global.record(false);
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    let u: f64 = rng.random();
    let terms = match PathTerms::evaluate(&draw, &state.z, &state.x, &state.params, &state.rev_params, cache) {
        Ok(t) => t,
        Err(e) if is_rejection(&e) => {
            state.counters.global.record(false);
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    let accepted = mh_accept(terms.log_weight() - state.terms.log_weight(), u);
    if accepted {
        state.draw = draw;
        state.terms = terms;
    }
    state.counters.global.record(accepted);
    Ok(accepted)
}
