//! Brute-force reference estimators: Monte Carlo means with standard errors
//! and trapezoidal integration over a positive scalar.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matcore::Mat;

/// Entrywise Monte Carlo mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: Mat,
    pub stderr: Mat,
    pub n_draws: usize,
}

impl McEstimate {
    /// Largest `|mean - target| / stderr` over entries; entries with zero
    /// standard error count only when they differ from the target.
    pub fn max_z(&self, target: &Mat) -> f64 {
        let mut worst = 0.0f64;
        for ((m, s), t) in self.mean.iter().zip(self.stderr.iter()).zip(target.iter()) {
            let d = (m - t).abs();
            let z = if *s > 0.0 {
                d / s
            } else if d <= 1e-12 * t.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        worst
    }

    /// True when every entry lies within `k` standard errors of `target`.
    pub fn within(&self, target: &Mat, k: f64) -> bool {
        self.max_z(target) <= k
    }

    pub fn scalar_mean(&self) -> f64 {
        self.mean[(0, 0)]
    }

    pub fn scalar_stderr(&self) -> f64 {
        self.stderr[(0, 0)]
    }
}

/// Welford accumulation of `n_draws` matrices produced by `sampler`.
pub fn mc_mean<F>(mut sampler: F, n_draws: usize) -> Result<McEstimate>
where
    F: FnMut() -> Mat,
{
    if n_draws < 2 {
        return Err(Error::InvalidParameter("n_draws must be at least 2"));
    }
    let first = sampler();
    let mut mean = first.clone();
    let mut m2 = Mat::zeros(first.nrows(), first.ncols());
    for k in 2..=n_draws {
        let x = sampler();
        let delta = &x - &mean;
        mean += &delta / k as f64;
        let delta2 = &x - &mean;
        m2 += delta.component_mul(&delta2);
    }
    let nf = n_draws as f64;
    let stderr = m2.map(|v| (v.max(0.0) / (nf - 1.0) / nf).sqrt());
    Ok(McEstimate { mean, stderr, n_draws })
}

/// Scalar convenience wrapper around [`mc_mean`].
pub fn mc_mean_scalar<F>(mut sampler: F, n_draws: usize) -> Result<McEstimate>
where
    F: FnMut() -> f64,
{
    mc_mean(|| Mat::from_element(1, 1, sampler()), n_draws)
}

/// Integration range and stopping rule for [`scalar_marginal_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadGrid {
    pub lo: f64,
    pub hi: f64,
    pub initial_intervals: usize,
    pub tol: f64,
    pub max_halvings: u32,
}

impl QuadGrid {
    pub fn new(lo: f64, hi: f64) -> Self {
        QuadGrid { lo, hi, initial_intervals: 64, tol: 1e-6, max_halvings: 18 }
    }
}

/// Trapezoidal rule for `∫ f(σ) dσ` over `[lo, hi]` with `intervals`
/// equal steps in `log σ`.
pub fn log_trapezoid<F>(f: F, lo: f64, hi: f64, intervals: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / intervals as f64;
    let g = |u: f64| f(u.exp()) * u.exp();
    let mut sum = 0.5 * (g(a) + g(b));
    for k in 1..intervals {
        sum += g(a + k as f64 * h);
    }
    sum * h
}

/// Trapezoidal integral of `f` over `[lo, hi]` on a grid uniform in
/// `log σ`, halving the spacing until successive estimates differ by less
/// than `tol` relative to the estimate.
///
/// Fails with [`Error::GridInsufficient`] when the rule does not settle or
/// the integrand is still significant at either end of the range.
pub fn scalar_marginal_quadrature<F>(f: F, grid: QuadGrid) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(grid.lo > 0.0 && grid.hi > grid.lo) || grid.initial_intervals == 0 {
        return Err(Error::InvalidParameter("quadrature range must satisfy 0 < lo < hi"));
    }
    let (a, b) = (grid.lo.ln(), grid.hi.ln());
    // integrand in u = log σ
    let g = |u: f64| {
        let s = u.exp();
        f(s) * s
    };
    let mut m = grid.initial_intervals;
    let mut h = (b - a) / m as f64;
    let mut sum = 0.5 * (g(a) + g(b));
    for k in 1..m {
        sum += g(a + k as f64 * h);
    }
    let mut est = sum * h;
    if !est.is_finite() {
        return Err(Error::GridInsufficient);
    }
    for _ in 0..grid.max_halvings {
        for k in 0..m {
            sum += g(a + (k as f64 + 0.5) * h);
        }
        m *= 2;
        h *= 0.5;
        let next = sum * h;
        if !next.is_finite() {
            return Err(Error::GridInsufficient);
        }
        let change = (next - est).abs();
        est = next;
        if change <= grid.tol * est.abs() {
            let edge = g(a).abs().max(g(b).abs());
            if edge > grid.tol * est.abs().max(f64::MIN_POSITIVE) && edge > 0.0 {
                return Err(Error::GridInsufficient);
            }
            return Ok(est);
        }
    }
    Err(Error::GridInsufficient)
}
