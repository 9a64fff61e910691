//! Independence Metropolis-Hastings for `(F, S)`.
//!
//! The free parameters are AR coefficients `ρ` and an innovation scale `V`
//! in a basis `E`: `F = E diag(ρ) E'`, `S = E S̃ E'` with
//! `S̃_ij = Ṽ_ij / (1 - ρ_i ρ_j)`. Diagonal mode has `E = I` and a full
//! `V ~ W(v, V_c / v)`; shared-eigenvector mode keeps `Ṽ` diagonal with
//! one-dimensional Wishart laws on its entries.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::{loglik_x_given_z, loglik_z_approx, DofSchedule};
use crate::iwar::ModelParams;
use crate::matcore::{Beta, Mat, SymMatrix, Vector, Wishart};

/// `S_ij = V_ij / (1 - ρ_i ρ_j)`.
pub fn s_from_rho_v(rho: &[f64], v: &SymMatrix) -> SymMatrix {
    let q = v.dim();
    SymMatrix::symmetrize(Mat::from_fn(q, q, |i, j| v[(i, j)] / (1.0 - rho[i] * rho[j])))
}

/// `V = (1 1' - ρ ρ') ∘ S`.
pub fn v_from_rho_s(rho: &[f64], s: &SymMatrix) -> SymMatrix {
    let q = s.dim();
    SymMatrix::symmetrize(Mat::from_fn(q, q, |i, j| (1.0 - rho[i] * rho[j]) * s[(i, j)]))
}

#[derive(Debug, Clone, PartialEq)]
pub enum HyperMode {
    Diagonal,
    /// Orthogonal basis `E` (columns are eigenvectors).
    SharedEigen { basis: Mat },
    /// `F = diag(ρ1)` held at the proposal center; only `V` moves.
    FixedRho,
    Fixed { f: Mat, s: SymMatrix },
}

/// `ρ_i ~ Beta(c ρ0_i, c (1 - ρ0_i))`, `V ~ W(v0, V0 / v0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPrior {
    pub c: f64,
    pub rho0: Vec<f64>,
    pub v0: f64,
    pub vmat0: SymMatrix,
}

/// `ρ*_i ~ Beta(d ρ1_i, d (1 - ρ1_i))`, `V* ~ W(v1, V1 / v1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperProposal {
    pub d: f64,
    pub rho1: Vec<f64>,
    pub v1: f64,
    pub vmat1: SymMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperConfig {
    pub mode: HyperMode,
    pub prior: HyperPrior,
    pub proposal: HyperProposal,
    /// Re-center the proposal on the current state after each accepted
    /// move during burn-in.
    pub adapt: bool,
}

/// Current `(ρ, Ṽ)`; `Ṽ` is in the rotated basis for shared-eigenvector mode.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperValue {
    pub rho: Vec<f64>,
    pub v: SymMatrix,
}

/// A `(ρ, V)`-shaped law, used for both prior and proposal.
struct CenteredLaw<'a> {
    conc: f64,
    rho: &'a [f64],
    dof: f64,
    vmat: &'a SymMatrix,
}

impl HyperConfig {
    pub fn validate(&self, q: usize) -> Result<()> {
        let pr = &self.prior;
        let pp = &self.proposal;
        if pr.rho0.len() != q || pp.rho1.len() != q {
            return Err(Error::Config("rho vectors must have one entry per series".into()));
        }
        if pr.vmat0.dim() != q || pp.vmat1.dim() != q {
            return Err(Error::Config("V matrices must be q x q".into()));
        }
        if !(pr.c > 0.0 && pp.d > 0.0) {
            return Err(Error::Config("c and d must be positive".into()));
        }
        let min = q as f64 - 1.0;
        if !(pr.v0 > min && pp.v1 > min && pp.v1 > 0.0 && pr.v0 > 0.0) {
            return Err(Error::Config("v0 and v1 must exceed q - 1".into()));
        }
        if matches!(self.mode, HyperMode::FixedRho) {
            if pp.rho1.iter().any(|r| !(*r >= 0.0 && *r < 1.0)) {
                return Err(Error::Config("fixed rho must lie in [0, 1)".into()));
            }
        } else if pr.rho0.iter().chain(pp.rho1.iter()).any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Config("rho centers must lie in (0, 1)".into()));
        }
        if !pr.vmat0.is_pd(crate::matcore::DEFAULT_PD_TOL) || !pp.vmat1.is_pd(crate::matcore::DEFAULT_PD_TOL) {
            return Err(Error::Config("V centers must be positive definite".into()));
        }
        match &self.mode {
            HyperMode::SharedEigen { basis } => {
                if basis.shape() != (q, q) {
                    return Err(Error::Config("eigenbasis must be q x q".into()));
                }
                let g = basis.transpose() * basis - Mat::identity(q, q);
                if g.amax() > 1e-8 {
                    return Err(Error::Config("eigenbasis must be orthogonal".into()));
                }
            }
            HyperMode::Fixed { f, s } => {
                ModelParams::new(1.0, f.clone(), s.clone()).map_err(|e| Error::Config(alloc::format!("{e}")))?;
            }
            HyperMode::Diagonal | HyperMode::FixedRho => {}
        }
        Ok(())
    }

    fn rotate(&self, m: &SymMatrix) -> SymMatrix {
        match &self.mode {
            HyperMode::SharedEigen { basis } => m.congruence(&basis.transpose()),
            _ => m.clone(),
        }
    }

    fn eigen(&self) -> bool {
        matches!(self.mode, HyperMode::SharedEigen { .. })
    }

    fn prior_law(&self) -> CenteredLaw<'_> {
        CenteredLaw { conc: self.prior.c, rho: &self.prior.rho0, dof: self.prior.v0, vmat: &self.prior.vmat0 }
    }

    fn proposal_law(&self) -> CenteredLaw<'_> {
        CenteredLaw { conc: self.proposal.d, rho: &self.proposal.rho1, dof: self.proposal.v1, vmat: &self.proposal.vmat1 }
    }

    /// The model implied by `value`, or the fixed model.
    pub fn params(&self, n: f64, value: &HyperValue) -> Result<ModelParams> {
        match &self.mode {
            HyperMode::Fixed { f, s } => ModelParams::new(n, f.clone(), s.clone()),
            HyperMode::Diagonal | HyperMode::FixedRho => {
                let f = Mat::from_diagonal(&Vector::from_column_slice(&value.rho));
                ModelParams::new(n, f, s_from_rho_v(&value.rho, &value.v))
            }
            HyperMode::SharedEigen { basis } => {
                let r = Mat::from_diagonal(&Vector::from_column_slice(&value.rho));
                let f = basis * r * basis.transpose();
                let s = s_from_rho_v(&value.rho, &value.v).congruence(basis);
                ModelParams::new(n, f, s)
            }
        }
    }

    /// The proposal mean, used to start a chain.
    pub fn initial_value(&self) -> HyperValue {
        let v = self.rotate(&self.proposal.vmat1);
        let v = if self.eigen() { diagonal_part(&v) } else { v };
        HyperValue { rho: self.proposal.rho1.clone(), v }
    }

    fn law_logpdf(&self, law: &CenteredLaw<'_>, value: &HyperValue) -> f64 {
        let mut lp = 0.0;
        let free_rho = if matches!(self.mode, HyperMode::FixedRho) { &[][..] } else { &value.rho[..] };
        for (r, c) in free_rho.iter().zip(law.rho) {
            lp += match Beta::new(law.conc * c, law.conc * (1.0 - c)) {
                Ok(b) => b.ln_pdf(*r),
                Err(_) => return f64::NEG_INFINITY,
            };
        }
        let center = self.rotate(law.vmat);
        if self.eigen() {
            for i in 0..value.v.dim() {
                let w = Wishart::new(law.dof, SymMatrix::from_diagonal(&[center[(i, i)] / law.dof]));
                lp += match w.and_then(|w| w.ln_pdf(&SymMatrix::from_diagonal(&[value.v[(i, i)]]))) {
                    Ok(v) => v,
                    Err(_) => return f64::NEG_INFINITY,
                };
            }
        } else {
            lp += match Wishart::new(law.dof, center.scaled(1.0 / law.dof)).and_then(|w| w.ln_pdf(&value.v)) {
                Ok(v) => v,
                Err(_) => return f64::NEG_INFINITY,
            };
        }
        lp
    }

    pub fn prior_logpdf(&self, value: &HyperValue) -> f64 {
        self.law_logpdf(&self.prior_law(), value)
    }

    pub fn proposal_logpdf(&self, value: &HyperValue) -> f64 {
        self.law_logpdf(&self.proposal_law(), value)
    }

    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HyperValue> {
        let law = self.proposal_law();
        let rho = if matches!(self.mode, HyperMode::FixedRho) {
            law.rho.to_vec()
        } else {
            law.rho
                .iter()
                .map(|c| Beta::new(law.conc * c, law.conc * (1.0 - c)).map(|b| b.sample(rng)))
                .collect::<Result<Vec<_>>>()?
        };
        let center = self.rotate(law.vmat);
        let v = if self.eigen() {
            let d: Vec<f64> = (0..center.dim())
                .map(|i| {
                    Wishart::new(law.dof, SymMatrix::from_diagonal(&[center[(i, i)] / law.dof]))
                        .map(|w| w.sample(rng)[(0, 0)])
                })
                .collect::<Result<_>>()?;
            SymMatrix::from_diagonal(&d)
        } else {
            Wishart::new(law.dof, center.scaled(1.0 / law.dof))?.sample(rng)
        };
        Ok(HyperValue { rho, v })
    }

    /// Moves the proposal center to `value`.
    pub fn recenter(&mut self, value: &HyperValue) {
        if !matches!(self.mode, HyperMode::FixedRho) {
            self.proposal.rho1 = value.rho.iter().map(|r| r.clamp(1e-3, 1.0 - 1e-3)).collect();
        }
        self.proposal.vmat1 = match &self.mode {
            HyperMode::SharedEigen { basis } => value.v.congruence(basis),
            _ => value.v.clone(),
        };
    }
}

fn diagonal_part(m: &SymMatrix) -> SymMatrix {
    let d: Vec<f64> = (0..m.dim()).map(|i| m[(i, i)]).collect();
    SymMatrix::from_diagonal(&d)
}

/// `log p(x | z, F, S) + log p̂(z | F, S)`.
pub fn hyper_log_target(params: &ModelParams, xs: &[Vector], zs: &[Vector], schedule: &DofSchedule) -> Result<f64> {
    Ok(loglik_x_given_z(params, xs, zs)? + loglik_z_approx(params, zs, schedule)?)
}

/// Outcome of one hyperparameter proposal.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperMove {
    Accepted { value: HyperValue, params: ModelParams },
    Rejected,
    /// The proposed `(ρ, V)` did not define a valid model.
    Invalid,
}

/// Log MH ratio of moving from `current` to `proposed`.
pub fn hyper_log_ratio(
    config: &HyperConfig,
    current: (&HyperValue, f64),
    proposed: (&HyperValue, f64),
) -> f64 {
    (proposed.1 + config.prior_logpdf(proposed.0) - config.proposal_logpdf(proposed.0))
        - (current.1 + config.prior_logpdf(current.0) - config.proposal_logpdf(current.0))
}

/// One independence MH step for `(F, S)` given `x_{1:T}` and `z_{1:T}`.
#[allow(clippy::too_many_arguments)]
pub fn hyper_mh_step<R: Rng + ?Sized>(
    config: &HyperConfig,
    n: f64,
    current: &HyperValue,
    current_params: &ModelParams,
    xs: &[Vector],
    zs: &[Vector],
    schedule: &DofSchedule,
    rng: &mut R,
) -> Result<HyperMove> {
    if matches!(config.mode, HyperMode::Fixed { .. }) {
        return Ok(HyperMove::Rejected);
    }
    let proposed = config.propose(rng)?;
    let u: f64 = rng.random();
    let params = match config.params(n, &proposed) {
        Ok(p) => p,
        Err(_) => return Ok(HyperMove::Invalid),
    };
    let target_new = match hyper_log_target(&params, xs, zs, schedule) {
        Ok(v) if v.is_finite() => v,
        _ => return Ok(HyperMove::Invalid),
    };
    let target_cur = hyper_log_target(current_params, xs, zs, schedule)?;
    let ratio = hyper_log_ratio(config, (current, target_cur), (&proposed, target_new));
    if super::ffbs::mh_accept(ratio, u) {
        Ok(HyperMove::Accepted { value: proposed, params })
    } else {
        Ok(HyperMove::Rejected)
    }
}
