//! Data-driven centers for the hyperparameter prior and proposal.
//!
//! `S` is estimated by the second-moment matrix of the series. With
//! `Y_t = x_t x_t'` and any instrument `g_j` measurable at `j < t`, the affine
//! conditional mean gives `Cov(Y_{t+1}, g_j) = M_ρ Cov(Y_t, g_j)` where
//! `M_ρ(C) = F C F' + c tr(C (nS)^{-1}) V`. The `ρ_i` minimize the squared
//! mismatch over lags `1..=lags` by coordinate-wise grid search, using the
//! bounded instruments `x_j x_j' / (1 + x_j' S^{-1} x_j)`.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use super::hyper::{v_from_rho_s, HyperConfig, HyperMode, HyperPrior, HyperProposal};
use crate::error::{Error, Result};
use crate::iwar::ModelParams;
use crate::matcore::{Mat, SymMatrix, Vector, DEFAULT_PD_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Elicited {
    pub rho: Vec<f64>,
    pub s: SymMatrix,
    pub v: SymMatrix,
}

/// `(1/T) Σ_t x_t x_t'`.
pub fn second_moment(xs: &[Vector]) -> Result<SymMatrix> {
    let q = xs.first().ok_or(Error::InvalidParameter("empty series"))?.len();
    let mut m = Mat::zeros(q, q);
    for x in xs {
        if x.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: x.len() });
        }
        m += x * x.transpose();
    }
    Ok(SymMatrix::symmetrize(m / xs.len() as f64))
}

fn outer(x: &Vector) -> Mat {
    x * x.transpose()
}

/// `covs[l][b] = Cov(Y_{j+l+1}, g_{b,j})` for `l = 0..=lags`.
fn lagged_covs(xs: &[Vector], s: &SymMatrix, lags: usize) -> Result<Vec<Vec<SymMatrix>>> {
    let q = s.dim();
    let sc = s.cholesky(DEFAULT_PD_TOL)?;
    let pairs: Vec<(usize, usize)> = (0..q).flat_map(|a| (a..q).map(move |b| (a, b))).collect();
    let gs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let w = 1.0 + sc.quad_form(x);
            pairs.iter().map(|&(a, b)| x[a] * x[b] / w).collect()
        })
        .collect();
    let ys: Vec<Mat> = xs.iter().map(outer).collect();
    let mut covs = Vec::with_capacity(lags + 1);
    for l in 1..=lags + 1 {
        let m = xs.len() - l;
        let ybar = ys[l..].iter().fold(Mat::zeros(q, q), |acc, y| acc + y) / m as f64;
        let mut row = Vec::with_capacity(pairs.len());
        for b in 0..pairs.len() {
            let gbar = gs[..m].iter().map(|g| g[b]).sum::<f64>() / m as f64;
            let mut c = Mat::zeros(q, q);
            for j in 0..m {
                c += (&ys[j + l] - &ybar) * (gs[j][b] - gbar);
            }
            row.push(SymMatrix::symmetrize(c / m as f64));
        }
        covs.push(row);
    }
    Ok(covs)
}

fn mismatch(covs: &[Vec<SymMatrix>], n: f64, s: &SymMatrix, rho: &[f64]) -> f64 {
    let f = Mat::from_diagonal(&Vector::from_column_slice(rho));
    let p = match ModelParams::new(n, f, s.clone()) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    let mut total = 0.0;
    for l in 0..covs.len() - 1 {
        for (next, cur) in covs[l + 1].iter().zip(&covs[l]) {
            let mapped = &cur.congruence(p.f()) + &p.v().scaled(p.c() * p.trace_ns_inv(cur));
            total += (next.as_mat() - mapped.as_mat()).norm_squared();
        }
    }
    total
}

/// Grid search over `ρ_i ∈ {(k + 1/2) / grid}` with `sweeps` coordinate passes.
pub fn elicit(xs: &[Vector], n: f64, lags: usize, grid: usize, sweeps: usize) -> Result<Elicited> {
    if grid == 0 || lags == 0 {
        return Err(Error::InvalidParameter("grid and lags must be positive"));
    }
    if xs.len() < lags + 3 {
        return Err(Error::InvalidParameter("series too short for the requested lags"));
    }
    let s = second_moment(xs)?;
    let q = s.dim();
    let covs = lagged_covs(xs, &s, lags)?;
    let points: Vec<f64> = (0..grid).map(|k| (k as f64 + 0.5) / grid as f64).collect();
    let mut rho = alloc::vec![points[grid / 2]; q];
    for _ in 0..sweeps.max(1) {
        for i in 0..q {
            let mut best = (f64::INFINITY, rho[i]);
            for &r in &points {
                rho[i] = r;
                let v = mismatch(&covs, n, &s, &rho);
                if v < best.0 {
                    best = (v, r);
                }
            }
            rho[i] = best.1;
        }
    }
    let v = v_from_rho_s(&rho, &s);
    if !v.is_pd(DEFAULT_PD_TOL) {
        return Err(Error::NotStationary(crate::error::Condition::V));
    }
    Ok(Elicited { rho, s, v })
}

/// Diagonal-mode defaults centered on the elicited values: prior
/// `ρ_i ~ Beta(100 ρ_i, 100 (1 - ρ_i))`, `V ~ W(q + 2, V / (q + 2))`;
/// proposal with `d = 750`, `v1 = 40`.
pub fn default_hyper_config(el: &Elicited) -> HyperConfig {
    let q = el.s.dim();
    HyperConfig {
        mode: HyperMode::Diagonal,
        prior: HyperPrior { c: 100.0, rho0: el.rho.clone(), v0: q as f64 + 2.0, vmat0: el.v.clone() },
        proposal: HyperProposal { d: 750.0, rho1: el.rho.clone(), v1: 40.0, vmat1: el.v.clone() },
        adapt: false,
    }
}
