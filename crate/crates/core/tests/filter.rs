mod common;

use common::*;
use iwar_core::filter::*;
use iwar_core::iwar::{sample_innovations, stationary_margin, ModelParams, ScalarParams};
use iwar_core::matcore::{iw_logpdf, mvn_sample, Mat, Vector};
use iwar_core::oracle::{mc_mean_scalar, scalar_marginal_quadrature, QuadGrid};
use rand::Rng;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn obs(z: &[f64], x: &[f64]) -> AugmentedObs {
    AugmentedObs::new(v(z), v(x)).unwrap()
}

fn scalar(n: f64, f: f64, s: f64) -> ModelParams {
    ScalarParams::new(n, f, s).unwrap().to_model().unwrap()
}

#[test]
fn schedule_values() {
    let rs = dof_schedule(6.0, 400, 0.98, 1.0).unwrap();
    assert_eq!(rs[0], 8.0);
    assert!((rs[1] - 8.84).abs() < 1e-12);
    assert!((rs[400] - 50.0).abs() < 0.02);
    assert!(rs.windows(2).all(|w| w[1] > w[0]));
    assert!(dof_schedule(6.0, 10, 1.0, 0.0).unwrap().iter().all(|r| *r == 8.0));
}

#[test]
fn scalar_first_step_value() {
    let p = scalar(2.0, 0.0, 1.0);
    let st = ff_step(&p, p.s(), &obs(&[0.0], &[1.0]), 4.0).unwrap();
    assert!((st.s[(0, 0)] - 1.0).abs() < 1e-15);
    let f = 0.6;
    let p = scalar(2.0, f, 1.0);
    let st = ff_step(&p, p.s(), &obs(&[0.0], &[1.0]), 4.0).unwrap();
    let want = (2.0 * (f * f + (2.0 / 3.0) * 1.5 * (1.0 - f * f)) + 1.0) / 3.0;
    assert!((st.s[(0, 0)] - want).abs() < 1e-15);
}

/// Conjugate update of the augmented prior `IW_{2q}(n+2, n [[S, SF'], [FS, S]])`
/// by one `N(0, Δ_1)` draw `y_1`.
#[test]
fn first_filter_step_is_the_exact_posterior() {
    let mut r = rng(40);
    for q in 1..=3 {
        let p = random_params(q, 3.0 + 5.0 * r.random::<f64>(), &mut r);
        let n = p.n();
        let s = p.s().as_mat();
        let fs = p.f() * s;
        let mut prior = Mat::zeros(2 * q, 2 * q);
        prior.view_mut((0, 0), (q, q)).copy_from(s);
        prior.view_mut((0, q), (q, q)).copy_from(&fs.transpose());
        prior.view_mut((q, 0), (q, q)).copy_from(&fs);
        prior.view_mut((q, q), (q, q)).copy_from(s);
        let y = obs(
            &(0..q).map(|_| r.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>(),
            &(0..q).map(|_| r.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>(),
        );
        let yv = y.stacked();
        let post_scale = prior * n + &yv * yv.transpose();
        let cache = forward_filter(&p, &[y], &DofSchedule::for_model(n, 0.98, 1.0).unwrap()).unwrap();
        let g = cache.step(1).posterior().unwrap();
        assert!((g.dof() - (n + 3.0)).abs() < 1e-15);
        for _ in 0..20 {
            let x = random_spd(2 * q, &mut r);
            let got = iw_logpdf(&x, &g).unwrap();
            let want = ref_iw_logpdf(x.as_mat(), n + 3.0, &post_scale);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "q={q}: {got} vs {want}");
        }
    }
}

#[test]
fn no_data_shrinks_the_predictive_mean() {
    let p = p2();
    let st = ff_step(&p, p.s(), &obs(&[0.0, 0.0], &[0.0, 0.0]), 8.84).unwrap();
    let pred = iwar_core::iwar::conditional_mean(&p, p.s());
    assert!(st.s.max_abs_diff(&pred.scaled(6.84 / 7.84)) < 1e-14);
}

#[test]
fn cache_stays_pd_along_simulated_paths() {
    let mut r = rng(41);
    for k in 0..12 {
        let q = 1 + k % 3;
        let p = random_params(q, 2.0 + 10.0 * r.random::<f64>(), &mut r);
        let (_, xs) = observe(&p, 200, &mut r);
        let zs: Vec<Vector> = (0..200).map(|_| mvn_sample(&Vector::zeros(q), p.s_chol(), &mut r)).collect();
        let cache = filter_for(&p, &zs, &xs);
        for st in cache.steps() {
            assert!(st.s.is_pd(0.0) && st.g22.is_pd(0.0) && st.rev_psi_law().scale().is_pd(0.0));
        }
    }
}

#[test]
fn conditional_likelihood_limits() {
    let p = p2();
    assert_eq!(loglik_x_given_z(&p, &[], &[]).unwrap(), 0.0);
    let x = v(&[0.4, -1.1]);
    let z = Vector::zeros(2);
    let nu = 10.0;
    let got = loglik_x_given_z(&p, &[x.clone()], &[z]).unwrap();
    let want = iwar_core::matcore::mvt_logpdf(&x, nu, &Vector::zeros(2), &p.v().scaled(6.0 / nu)).unwrap();
    assert!((got - want).abs() < 1e-12);
}

/// `p(x | z) = E[N(x | Υ z, Ψ)]` averaged over innovation draws.
#[test]
fn conditional_likelihood_matches_monte_carlo_marginalization() {
    let mut r = rng(42);
    let cases = [(p2(), v(&[0.5, -0.3]), v(&[0.2, 0.9])), (scalar(4.0, 0.7, 1.5), v(&[1.2]), v(&[-0.4]))];
    let mut points = 0;
    for (p, z, x0) in cases.iter() {
        for k in 0..3 {
            if points == 5 {
                break;
            }
            points += 1;
            let x = x0 * (0.5 + k as f64 * 0.75);
            let est = mc_mean_scalar(
                || {
                    let inn = sample_innovations(p, &mut r).unwrap();
                    ref_mvn_logpdf(&(&x - &inn.ups * z), inn.psi.as_mat()).exp()
                },
                200_000,
            )
            .unwrap();
            let exact = loglik_x_given_z(p, &[x.clone()], &[z.clone()]).unwrap().exp();
            assert!(est.scalar_stderr() < 0.005 * exact);
            assert!(((est.scalar_mean() - exact) / exact).abs() < 0.02, "{} vs {exact}", est.scalar_mean());
        }
    }
}

#[test]
fn latent_likelihood_first_term_value() {
    let p = scalar(2.0, 0.3, 1.0);
    let sched = DofSchedule::new(4.0, 1.0, 0.0).unwrap();
    let got = loglik_z_approx(&p, &[v(&[0.0])], &sched).unwrap().exp();
    let want = std::f64::consts::PI.powf(-0.5) * 4.0 / 2f64.powf(2.5) * libm::tgamma(2.5) / libm::tgamma(2.0);
    assert!((got - want).abs() < 1e-14);
    assert_eq!(loglik_z_approx(&p, &[], &sched).unwrap(), 0.0);
}

/// At `T = 1` the latent likelihood is `∫ N(z | 0, σ) IG(σ; (n+2)/2, ns/2) dσ`.
#[test]
fn latent_likelihood_matches_quadrature() {
    let mut r = rng(43);
    for _ in 0..5 {
        let (n, f, s) = (1.0 + 10.0 * r.random::<f64>(), r.random::<f64>() * 1.8 - 0.9, 0.3 + 3.0 * r.random::<f64>());
        let z = 3.0 * (r.random::<f64>() - 0.5);
        let p = scalar(n, f, s);
        let (a, b) = ((n + 2.0) / 2.0, n * s / 2.0);
        let dens = |sig: f64| {
            let ig = a * b.ln() - libm::lgamma(a) - (a + 1.0) * sig.ln() - b / sig;
            let nz = -0.5 * (2.0 * std::f64::consts::PI * sig).ln() - 0.5 * z * z / sig;
            (ig + nz).exp()
        };
        let quad = scalar_marginal_quadrature(dens, QuadGrid::new(1e-8, 1e10)).unwrap();
        let got = loglik_z_approx(&p, &[v(&[z])], &DofSchedule::for_model(n, 0.98, 1.0).unwrap()).unwrap().exp();
        assert!(((got - quad) / quad).abs() < 0.02, "n={n} s={s} z={z}: {got} vs {quad}");
    }
}

#[test]
fn latent_likelihood_matches_monte_carlo_at_t1() {
    let p = p2();
    let z = v(&[0.7, -0.2]);
    let margin = stationary_margin(&p);
    let mut r = rng(44);
    let est = mc_mean_scalar(|| ref_mvn_logpdf(&z, margin.sample(&mut r).unwrap().as_mat()).exp(), 200_000).unwrap();
    let got = loglik_z_approx(&p, &[z], &schedule(6.0)).unwrap().exp();
    assert!(((est.scalar_mean() - got) / got).abs() < 0.02);
}

#[test]
fn latent_likelihood_is_label_equivariant() {
    let p = p2();
    let perm = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let swapped = ModelParams::new(6.0, &perm * p.f() * &perm, p.s().congruence(&perm)).unwrap();
    let mut r = rng(45);
    let zs: Vec<Vector> = (0..50).map(|_| mvn_sample(&Vector::zeros(2), p.s_chol(), &mut r)).collect();
    let zp: Vec<Vector> = zs.iter().map(|z| &perm * z).collect();
    let a = loglik_z_approx(&p, &zs, &schedule(6.0)).unwrap();
    let b = loglik_z_approx(&swapped, &zp, &schedule(6.0)).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn likelihoods_are_deterministic_and_x_terms_factorize() {
    let p = p2();
    let mut r = rng(46);
    let (_, xs) = observe(&p, 30, &mut r);
    let zs: Vec<Vector> = (0..30).map(|_| mvn_sample(&Vector::zeros(2), p.s_chol(), &mut r)).collect();
    let a = loglik_x_given_z(&p, &xs, &zs).unwrap();
    assert_eq!(a.to_bits(), loglik_x_given_z(&p, &xs, &zs).unwrap().to_bits());
    let za = loglik_z_approx(&p, &zs, &schedule(6.0)).unwrap();
    assert_eq!(za.to_bits(), loglik_z_approx(&p, &zs, &schedule(6.0)).unwrap().to_bits());
    let x2: Vec<Vector> = xs.iter().chain(&xs).cloned().collect();
    let z2: Vec<Vector> = zs.iter().chain(&zs).cloned().collect();
    assert!((loglik_x_given_z(&p, &x2, &z2).unwrap() - 2.0 * a).abs() < 1e-10 * a.abs());
    for (x, z) in xs.iter().zip(&zs).take(5) {
        let t = loglik_x_given_z(&p, &[x.clone()], &[z.clone()]).unwrap();
        assert!((t - loglik_x_given_z_term_direct(&p, x, z).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn latent_term_matches_explicit_determinants() {
    let mut r = rng(47);
    let p = random_params(3, 5.0, &mut r);
    let z = v(&[0.3, -1.0, 2.0]);
    let (rr, q) = (7.0, 3.0);
    let a = p.s().as_mat() * (rr - 2.0);
    let b = &a + &z * z.transpose();
    let want = 0.5 * (rr + q - 1.0) * a.determinant().ln() - 0.5 * (rr + q) * b.determinant().ln()
        + libm::lgamma(0.5 * (rr + q))
        - libm::lgamma(0.5 * rr)
        - 0.5 * q * std::f64::consts::PI.ln();
    let got = loglik_z_approx(&p, &[z], &DofSchedule::new(rr, 0.98, 1.0).unwrap()).unwrap();
    assert!((got - want).abs() < 1e-10);
}
