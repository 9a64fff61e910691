mod common;

use common::*;
use iwar_core::iwar::{reverse_params, ModelParams};
use iwar_core::matcore::{mvn_sample, IWParams, Mat, SymMatrix, Vector};
use iwar_core::mcmc::*;
use iwar_core::oracle::{scalar_marginal_quadrature, QuadGrid};
use iwar_core::svmodel::{apply_coeffs, CoeffPrior, VarCoeffs};

fn p2_config() -> HyperConfig {
    let p = p2();
    HyperConfig {
        mode: HyperMode::Diagonal,
        prior: HyperPrior { c: 2.0, rho0: vec![0.5, 0.5], v0: 4.0, vmat0: p.v().clone() },
        proposal: HyperProposal { d: 750.0, rho1: vec![0.9, 0.5], v1: 40.0, vmat1: p.v().clone() },
        adapt: false,
    }
}

fn p2_data(horizon: usize, seed: u64) -> ChainData {
    let (_, xs) = observe(&p2(), horizon, &mut rng(seed));
    ChainData::direct(xs)
}

#[test]
fn zero_iterations_start_at_proposal_means() {
    let data = p2_data(30, 1);
    let mut cfg = SamplerConfig::new(6.0, p2_config());
    cfg.iterations = 0;
    let out = run_chain(&data, &cfg, &mut rng(2)).unwrap();
    assert_eq!(out.draws.len(), 1);
    assert_eq!(out.draws[0].iteration, 0);
    assert_eq!(out.draws[0].f, Mat::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]));
    assert!(out.draws[0].s.max_abs_diff(p2().s()) < 1e-12);
    assert_eq!(out.paths.len(), 1);
    assert_eq!(out.paths[0].1.horizon(), 30);
    assert_eq!(out.counters, AcceptCounters::default());
    assert!(out.state.reconstruction_residual() <= 1e-8);
}

#[test]
fn same_seed_replays_bit_identically() {
    let data = p2_data(25, 3);
    let mut cfg = SamplerConfig::new(6.0, p2_config());
    cfg.iterations = 20;
    cfg.burn_in = 5;
    let a = run_chain(&data, &cfg, &mut rng(4)).unwrap();
    let b = run_chain(&data, &cfg, &mut rng(4)).unwrap();
    assert_eq!(a, b);
    let c = run_chain(&data, &cfg, &mut rng(5)).unwrap();
    assert_ne!(a.state.path(), c.state.path());
}

#[test]
fn invariants_hold_after_every_iteration() {
    let data = p2_data(40, 6);
    let mut cfg = SamplerConfig::new(6.0, p2_config());
    cfg.sweeps = 2;
    let schedule = cfg.schedule().unwrap();
    let mut r = rng(7);
    let mut state = initialize(&data, &cfg, &mut r).unwrap();
    let iterations = 60;
    for _ in 0..iterations {
        let mut c = cfg.clone();
        iterate(&mut state, &data, &mut c, &schedule, false, &mut r).unwrap();
        assert!(state.reconstruction_residual() <= 1e-8);
        let h = state.hyper();
        assert!(v_from_rho_s(&h.rho, state.params().s()).max_abs_diff(&h.v) < 1e-12);
        let cache = state.filter(&schedule).unwrap();
        let rp = reverse_params(state.params()).unwrap();
        let fresh = PathTerms::evaluate(state.draw(), state.z(), state.x(), state.params(), &rp, &cache).unwrap();
        assert!((fresh.log_weight() - state.terms().log_weight()).abs() < 1e-8);
    }
    let c = state.counters();
    for (tally, expected) in [
        (c.global, iterations),
        (c.innovations, iterations * 40 * 2),
        (c.sigma_t, iterations),
        (c.hyper, iterations),
    ] {
        assert_eq!(tally.accepted + tally.rejected, expected as u64);
        assert_eq!(tally.proposed(), expected as u64);
    }
    assert!(c.hyper_invalid <= c.hyper.rejected);
}

/// Exact posterior mean of `s` for iid `x_t ~ t_{n+2}(0, n s / (n + 2))`
/// under the `Gamma(v0 / 2, 2 m / v0)` prior, by quadrature.
fn iid_scale_posterior_mean(xs: &[f64], n: f64, v0: f64, m: f64) -> f64 {
    let nu = n + 2.0;
    let lp = |s: f64| {
        let sc2 = n * s / nu;
        let ll: f64 = xs.iter().map(|x| -0.5 * sc2.ln() - 0.5 * (nu + 1.0) * (1.0 + x * x / (nu * sc2)).ln()).sum();
        ll + (0.5 * v0 - 1.0) * s.ln() - 0.5 * s * v0 / m
    };
    let peak = lp(m);
    let grid = || QuadGrid::new(m / 10.0, m * 10.0);
    let z = scalar_marginal_quadrature(|s| (lp(s) - peak).exp(), grid()).unwrap();
    scalar_marginal_quadrature(|s| s * (lp(s) - peak).exp(), grid()).unwrap() / z
}

#[test]
fn scale_posterior_matches_iid_inverse_wishart_data() {
    let n = 6.0;
    let s_true = 2.0;
    let mut r = rng(1);
    let margin = IWParams::new(n + 2.0, SymMatrix::from_diagonal(&[n * s_true])).unwrap();
    let zero = Vector::zeros(1);
    let xs: Vec<Vector> = (0..400)
        .map(|_| {
            let sigma = margin.sample(&mut r).unwrap();
            mvn_sample(&zero, &sigma.cholesky(0.0).unwrap(), &mut r)
        })
        .collect();
    let m2 = elicit::second_moment(&xs).unwrap();
    let scalars: Vec<f64> = xs.iter().map(|x| x[0]).collect();
    let exact = iid_scale_posterior_mean(&scalars, n, 3.0, m2[(0, 0)]);
    let config = HyperConfig {
        mode: HyperMode::FixedRho,
        prior: HyperPrior { c: 2.0, rho0: vec![0.5], v0: 3.0, vmat0: m2.clone() },
        proposal: HyperProposal { d: 750.0, rho1: vec![0.0], v1: 40.0, vmat1: m2 },
        adapt: false,
    };
    let mut cfg = SamplerConfig::new(n, config);
    cfg.iterations = 1500;
    cfg.burn_in = 500;
    let out = run_chain(&ChainData::direct(xs), &cfg, &mut r).unwrap();
    assert!(out.abort.is_none());
    let post: Vec<f64> = out.draws.iter().filter(|d| d.iteration > cfg.burn_in).map(|d| d.s[(0, 0)]).collect();
    assert!(out.draws.iter().all(|d| d.f[(0, 0)] == 0.0));
    let mean = post.iter().sum::<f64>() / post.len() as f64;
    assert!((mean - exact).abs() < 0.05 * exact, "sampler {mean} vs exact {exact}");
    assert!((mean - s_true).abs() < 0.1 * s_true, "posterior mean {mean}");
}

#[test]
fn var_layer_runs_and_records_coefficients() {
    let p = p2();
    let mut r = rng(9);
    let (_, x) = observe(&p, 60, &mut r);
    let coeffs = VarCoeffs::new(Mat::from_row_slice(1, 2, &[0.6, -0.3])).unwrap();
    let presample = vec![Vector::from_column_slice(&[0.1, 0.2])];
    let xi = apply_coeffs(&presample, &x, &coeffs).unwrap();
    let data = ChainData { xi, var_prior: Some(CoeffPrior::isotropic(1, 2, 10.0).unwrap()) };
    let mut cfg = SamplerConfig::new(6.0, p2_config());
    cfg.iterations = 30;
    cfg.burn_in = 10;
    cfg.thin = 5;
    let out = run_chain(&data, &cfg, &mut r).unwrap();
    assert!(out.abort.is_none());
    assert!(out.draws.iter().all(|d| d.coeffs.as_ref().is_some_and(|c| c.lags() == 1)));
    assert_eq!(out.paths.iter().map(|(i, _)| *i).collect::<Vec<_>>(), vec![15, 20, 25, 30]);
    assert_eq!(out.state.x().len(), 60);
}

#[test]
fn invalid_configuration_is_rejected() {
    let data = p2_data(10, 10);
    let mut cfg = SamplerConfig::new(6.0, p2_config());
    cfg.thin = 0;
    assert!(matches!(run_chain(&data, &cfg, &mut rng(1)), Err(iwar_core::Error::Config(_))));
    let mut cfg = SamplerConfig::new(6.0, p2_config());
    cfg.hyper.proposal.rho1 = vec![0.9];
    assert!(matches!(run_chain(&data, &cfg, &mut rng(1)), Err(iwar_core::Error::Config(_))));
    let bad = ModelParams::new(6.0, Mat::identity(2, 2) * 0.5, SymMatrix::identity(2)).unwrap();
    assert_eq!(bad.q(), 2);
}
