#![allow(dead_code)]

use iwar_core::filter::{forward_filter, AugmentedObs, DofSchedule, FilterCache};
use iwar_core::iwar::{simulate, ModelParams, VarPath};
use iwar_core::matcore::{mvn_sample, Mat, SymMatrix, Vector};
use iwar_core::mcmc::{backward_sample_path, ChainState, HyperValue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn p2() -> ModelParams {
    ModelParams::new(
        6.0,
        Mat::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]),
        SymMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 1.0]).unwrap(),
    )
    .unwrap()
}

pub fn schedule(n: f64) -> DofSchedule {
    DofSchedule::for_model(n, 0.98, 1.0).unwrap()
}

/// Path and observations `x_t ~ N(0, Σ_t)`.
pub fn observe<R: Rng>(p: &ModelParams, horizon: usize, rng: &mut R) -> (VarPath, Vec<Vector>) {
    let sim = simulate(p, horizon, None, rng).unwrap();
    let zero = Vector::zeros(p.q());
    let xs = (1..=horizon).map(|t| mvn_sample(&zero, &sim.path.get(t).cholesky(1e-12).unwrap(), rng)).collect();
    (sim.path, xs)
}

pub fn random_spd<R: Rng>(q: usize, rng: &mut R) -> SymMatrix {
    let a = Mat::from_fn(q, q, |_, _| rng.random::<f64>() - 0.5);
    SymMatrix::symmetrize(&a * a.transpose() + Mat::identity(q, q) * 0.5)
}

/// Diagonal-`F` model with random `ρ` and `S`.
pub fn random_params<R: Rng>(q: usize, n: f64, rng: &mut R) -> ModelParams {
    loop {
        let rho: Vec<f64> = (0..q).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
        let f = Mat::from_diagonal(&Vector::from_column_slice(&rho));
        if let Ok(p) = ModelParams::new(n, f, random_spd(q, rng)) {
            return p;
        }
    }
}

pub fn filter_for(p: &ModelParams, zs: &[Vector], xs: &[Vector]) -> FilterCache {
    let ys: Vec<AugmentedObs> =
        zs.iter().zip(xs).map(|(z, x)| AugmentedObs::new(z.clone(), x.clone()).unwrap()).collect();
    forward_filter(p, &ys, &schedule(p.n())).unwrap()
}

/// A chain state on simulated data with `z_t ~ N(0, S)` and one FFBS path.
pub fn state_fixture(p: &ModelParams, horizon: usize, seed: u64) -> (ChainState, FilterCache) {
    let mut r = rng(seed);
    let (_, xs) = observe(p, horizon, &mut r);
    let zero = Vector::zeros(p.q());
    let zs: Vec<Vector> = (0..horizon).map(|_| mvn_sample(&zero, p.s_chol(), &mut r)).collect();
    let cache = filter_for(p, &zs, &xs);
    let draw = backward_sample_path(&cache, &mut r).unwrap();
    let rho: Vec<f64> = (0..p.q()).map(|i| p.f()[(i, i)]).collect();
    let hyper = HyperValue { rho, v: p.v().clone() };
    let state = ChainState::new(zs, xs, draw, p.clone(), hyper, None, &cache).unwrap();
    (state, cache)
}

/// `ln Γ_q(a)` from scalar log-gamma values.
pub fn ref_ln_mvgamma(q: usize, a: f64) -> f64 {
    let qf = q as f64;
    qf * (qf - 1.0) / 4.0 * std::f64::consts::PI.ln() + (0..q).map(|j| libm::lgamma(a - j as f64 / 2.0)).sum::<f64>()
}

/// Inverse Wishart log density with mean `scale / (dof - 2)`, evaluated
/// with explicit inverses and determinants.
pub fn ref_iw_logpdf(x: &Mat, dof: f64, scale: &Mat) -> f64 {
    let q = x.nrows() as f64;
    let nu = dof + q - 1.0;
    let xinv = x.clone().try_inverse().unwrap();
    0.5 * nu * scale.determinant().ln() - 0.5 * nu * q * 2f64.ln() - ref_ln_mvgamma(x.nrows(), 0.5 * nu)
        - 0.5 * (nu + q + 1.0) * x.determinant().ln()
        - 0.5 * (scale * xinv).trace()
}

pub fn ref_mvn_logpdf(x: &Vector, cov: &Mat) -> f64 {
    let q = x.len() as f64;
    let inv = cov.clone().try_inverse().unwrap();
    -0.5 * q * (2.0 * std::f64::consts::PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * (x.transpose() * inv * x)[(0, 0)]
}

/// Batch-means standard error of the mean of an autocorrelated series.
pub fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
