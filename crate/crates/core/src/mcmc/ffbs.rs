//! Backward sampling of `(Σ_T, Υ̃_{1:T}, Ψ̃_{1:T})` from the filter, the
//! per-step log densities of the proposal, prior and likelihood, and the
//! global independence move.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::FilterCache;
use crate::iwar::{stationary_margin, Direction, Innovations, ModelParams, VarPath};
use crate::matcore::{
    matnorm_logpdf_factored, matnorm_sample_factored, mvn_logpdf_factored, CholeskyFactor, IWParams, Mat, SymMatrix,
    Vector, DEFAULT_PD_TOL,
};

/// A complete path in both parameterizations. `rev[t-1]` maps `Σ_t` to
/// `Σ_{t-1}`; `fwd[t-1]` maps `Σ_{t-1}` to `Σ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDraw {
    pub path: VarPath,
    pub rev: Vec<Innovations>,
    pub fwd: Vec<Innovations>,
}

impl PathDraw {
    pub fn horizon(&self) -> usize {
        self.path.horizon()
    }

    pub fn sigma_t(&self) -> &SymMatrix {
        self.path.get(self.path.horizon())
    }

    /// `max_t ‖Σ_{t-1} - (Ψ̃_t + Υ̃_t Σ_t Υ̃_t')‖_max` over the stored path.
    pub fn reconstruction_residual(&self) -> f64 {
        let rebuilt = rebuild_path(self.sigma_t(), &self.rev);
        rebuilt.iter().zip(self.path.iter()).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

/// `Σ_{0:T}` from `Σ_T` and the reverse innovations.
pub fn rebuild_path(sigma_t: &SymMatrix, rev: &[Innovations]) -> Vec<SymMatrix> {
    let mut mats = alloc::vec![sigma_t.clone(); rev.len() + 1];
    for t in (1..=rev.len()).rev() {
        mats[t - 1] = rev[t - 1].apply(&mats[t]);
    }
    mats
}

/// The forward pair implied by `(Σ_{t-1}, Σ_t, Υ̃_t)`:
/// `Υ_t = Σ_t Υ̃_t' Σ_{t-1}^{-1}` and `Ψ_t = Σ_t - Υ_t Σ_{t-1} Υ_t'`.
pub fn reverse_to_forward(sigma_prev: &SymMatrix, sigma: &SymMatrix, rev_ups: &Mat) -> Result<Innovations> {
    let c = sigma_prev.cholesky(DEFAULT_PD_TOL)?;
    forward_with_factor(&c, sigma, rev_ups)
}

fn forward_with_factor(prev_chol: &CholeskyFactor, sigma: &SymMatrix, rev_ups: &Mat) -> Result<Innovations> {
    let b = rev_ups * sigma.as_mat();
    let ups = prev_chol.solve(&b).transpose();
    let h = prev_chol.solve_lower(&b);
    let psi = SymMatrix::symmetrize(sigma.as_mat() - h.transpose() * h);
    if !psi.is_pd(DEFAULT_PD_TOL) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(Innovations { ups, psi, direction: Direction::Forward })
}

/// Forward pair and `log N(z_t | 0, Σ_{t-1}) + log N(x_t | Υ_t z_t, Ψ_t)`.
pub fn step_likelihood(
    z: &Vector,
    x: &Vector,
    sigma_prev: &SymMatrix,
    sigma: &SymMatrix,
    rev_ups: &Mat,
) -> Result<(Innovations, f64)> {
    let pc = sigma_prev.cholesky(DEFAULT_PD_TOL)?;
    let fwd = forward_with_factor(&pc, sigma, rev_ups)?;
    let psi_chol = fwd.psi.cholesky(DEFAULT_PD_TOL)?;
    let zero = Vector::zeros(z.len());
    let ll = mvn_logpdf_factored(z, &zero, &pc) + mvn_logpdf_factored(x, &(&fwd.ups * z), &psi_chol);
    Ok((fwd, ll))
}

/// Samples `Σ_T ~ IW(r_T + 1, G22_T)` and then, for `t = T..1`,
/// `Ψ̃_t ~ IW(r_t + 1 + q, G11 - G21' G22^{-1} G21)`,
/// `Υ̃_t | Ψ̃_t ~ N(G21' G22^{-1}, Ψ̃_t, G22^{-1})` and
/// `Σ_{t-1} = Ψ̃_t + Υ̃_t Σ_t Υ̃_t'`.
pub fn backward_sample_path<R: Rng + ?Sized>(cache: &FilterCache, rng: &mut R) -> Result<PathDraw> {
    let horizon = cache.horizon();
    if horizon == 0 {
        return Err(Error::InvalidParameter("backward sampling needs at least one step"));
    }
    let sigma_t = cache.step(horizon).sigma_law().sample(rng)?;
    let mut rev = Vec::with_capacity(horizon);
    let mut mats = alloc::vec![sigma_t; horizon + 1];
    for t in (1..=horizon).rev() {
        let st = cache.step(t);
        let psi = st.rev_psi_law().sample(rng)?;
        let psi_chol = psi.cholesky(DEFAULT_PD_TOL)?;
        let ups = matnorm_sample_factored(st.rev_ups_mean(), &psi_chol, st.rev_ups_col_chol(), rng);
        let inn = Innovations { ups, psi, direction: Direction::Reverse };
        mats[t - 1] = inn.apply(&mats[t]);
        if !mats[t - 1].is_pd(DEFAULT_PD_TOL) {
            return Err(Error::NotPositiveDefinite);
        }
        rev.push(inn);
    }
    rev.reverse();
    let mut fwd = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        fwd.push(reverse_to_forward(&mats[t - 1], &mats[t], &rev[t - 1].ups)?);
    }
    Ok(PathDraw { path: VarPath::from_vec_unchecked(mats), rev, fwd })
}

/// A log density that factors as a `Σ_T` term plus one term per step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTerms {
    pub sigma: f64,
    pub steps: Vec<f64>,
}

impl LogTerms {
    pub fn total(&self) -> f64 {
        self.sigma + self.steps.iter().sum::<f64>()
    }
}

/// `log IW(Ψ̃ | law) + log N(Υ̃ | mean, Ψ̃, col)`.
pub(crate) fn theta_logpdf(
    inn: &Innovations,
    psi_chol: &CholeskyFactor,
    psi_law: &IWParams,
    mean: &Mat,
    col_chol: &CholeskyFactor,
) -> f64 {
    psi_law.ln_pdf_factored(psi_chol) + matnorm_logpdf_factored(&inn.ups, mean, psi_chol, col_chol)
}

/// Proposal term `q_t(θ_t)` at filter step `t`.
pub(crate) fn proposal_step_term(cache: &FilterCache, t: usize, inn: &Innovations) -> Result<f64> {
    let st = cache.step(t);
    let pc = inn.psi.cholesky(DEFAULT_PD_TOL)?;
    Ok(theta_logpdf(inn, &pc, st.rev_psi_law(), st.rev_ups_mean(), st.rev_ups_col_chol()))
}

/// Prior term `p(θ_t)` under the reverse-process parameters.
pub(crate) fn prior_step_term(rev_params: &ModelParams, inn: &Innovations) -> Result<f64> {
    let pc = inn.psi.cholesky(DEFAULT_PD_TOL)?;
    Ok(theta_logpdf(inn, &pc, rev_params.psi_law(), rev_params.f(), rev_params.ups_col_chol()))
}

pub(crate) fn proposal_sigma_term(cache: &FilterCache, sigma_t: &SymMatrix) -> Result<f64> {
    cache.step(cache.horizon()).sigma_law().ln_pdf(sigma_t)
}

pub(crate) fn prior_sigma_term(params: &ModelParams, sigma_t: &SymMatrix) -> Result<f64> {
    stationary_margin(params).ln_pdf(sigma_t)
}

/// Terms of `log q(Σ_T, θ_{1:T} | y)`:
/// `IW(Σ_T | r_T + 1, G22_T) ∏_t IW(Ψ̃_t | ...) N(Υ̃_t | ...)`.
pub fn proposal_logpdf_terms(sigma_t: &SymMatrix, rev: &[Innovations], cache: &FilterCache) -> Result<LogTerms> {
    if rev.len() != cache.horizon() {
        return Err(Error::DimensionMismatch { expected: cache.horizon(), found: rev.len() });
    }
    let sigma = proposal_sigma_term(cache, sigma_t)?;
    let steps = rev
        .iter()
        .enumerate()
        .map(|(i, inn)| proposal_step_term(cache, i + 1, inn))
        .collect::<Result<Vec<_>>>()?;
    Ok(LogTerms { sigma, steps })
}

/// Terms of the prior `IW(Σ_T | n+2, nS) ∏_t IW(Ψ̃_t | n+q+2, nṼ) N(Υ̃_t | F̃, Ψ̃_t, (nS)^{-1})`.
pub fn prior_logpdf_reverse_terms(
    sigma_t: &SymMatrix,
    rev: &[Innovations],
    params: &ModelParams,
    rev_params: &ModelParams,
) -> Result<LogTerms> {
    let sigma = prior_sigma_term(params, sigma_t)?;
    let steps = rev.iter().map(|inn| prior_step_term(rev_params, inn)).collect::<Result<Vec<_>>>()?;
    Ok(LogTerms { sigma, steps })
}

pub fn proposal_logpdf(draw: &PathDraw, cache: &FilterCache) -> Result<f64> {
    Ok(proposal_logpdf_terms(draw.sigma_t(), &draw.rev, cache)?.total())
}

pub fn prior_logpdf_reverse(draw: &PathDraw, params: &ModelParams, rev_params: &ModelParams) -> Result<f64> {
    Ok(prior_logpdf_reverse_terms(draw.sigma_t(), &draw.rev, params, rev_params)?.total())
}

/// `log p(y_t | Σ_{t-1}, Σ_t, Υ̃_t)` for `t = 1..T`.
pub fn loglik_terms(zs: &[Vector], xs: &[Vector], draw: &PathDraw) -> Result<Vec<f64>> {
    let horizon = draw.horizon();
    if zs.len() != horizon || xs.len() != horizon {
        return Err(Error::DimensionMismatch { expected: horizon, found: zs.len().min(xs.len()) });
    }
    (1..=horizon)
        .map(|t| {
            step_likelihood(&zs[t - 1], &xs[t - 1], draw.path.get(t - 1), draw.path.get(t), &draw.rev[t - 1].ups)
                .map(|(_, ll)| ll)
        })
        .collect()
}

/// Every cached log-density term of one path under the current model.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTerms {
    pub lik: Vec<f64>,
    pub prior: LogTerms,
    pub proposal: LogTerms,
}

impl PathTerms {
    pub fn evaluate(
        draw: &PathDraw,
        zs: &[Vector],
        xs: &[Vector],
        params: &ModelParams,
        rev_params: &ModelParams,
        cache: &FilterCache,
    ) -> Result<Self> {
        Ok(PathTerms {
            lik: loglik_terms(zs, xs, draw)?,
            prior: prior_logpdf_reverse_terms(draw.sigma_t(), &draw.rev, params, rev_params)?,
            proposal: proposal_logpdf_terms(draw.sigma_t(), &draw.rev, cache)?,
        })
    }

    /// `log r(Δ) = log p(y | Δ) + log p(Δ) - log q(Δ | y)`.
    pub fn log_weight(&self) -> f64 {
        self.lik.iter().sum::<f64>() + self.prior.total() - self.proposal.total()
    }
}

/// Metropolis-Hastings acceptance on the log scale with uniform `u`.
pub fn mh_accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || u.ln() < log_ratio
}

/// Log acceptance ratio of the global independence move.
pub fn global_log_ratio(current: &PathTerms, proposed: &PathTerms) -> f64 {
    proposed.log_weight() - current.log_weight()
}
