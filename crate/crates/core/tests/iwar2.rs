mod common;

use common::*;
use iwar_core::error::Condition;
use iwar_core::iwar2::*;
use iwar_core::matcore::{max_abs, Mat, SymMatrix};
use iwar_core::oracle::mc_mean;
use iwar_core::Error;
use rand::Rng;

fn p2_f() -> Mat {
    p2().f().clone()
}

fn s3_by_blocks(f: &Mat, s: &Mat) -> Mat {
    let q = f.nrows();
    let blocks = [
        [s.clone(), s * f.transpose(), s * f.transpose() * f.transpose()],
        [f * s, s.clone(), s * f.transpose()],
        [f * f * s, f * s, s.clone()],
    ];
    let mut m = Mat::zeros(3 * q, 3 * q);
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            m.view_mut((i * q, j * q), (q, q)).copy_from(b);
        }
    }
    m
}

#[test]
fn direct_validation_and_determinant_identity() {
    let p = p2();
    assert!(validate2_direct(6.0, p.f(), p.s(), 1e-10).is_ok());
    let s = p.s().as_mat();
    let zero = s3_matrix(&Mat::zeros(2, 2), p.s());
    assert!((zero.as_mat().determinant() - s.determinant().powi(3)).abs() < 1e-12);
    assert!(matches!(
        validate2_direct(6.0, &Mat::identity(2, 2), p.s(), 1e-10),
        Err(Error::NotStationary(_))
    ));
    let mut r = rng(30);
    for _ in 0..20 {
        let q = 1 + r.random_range(0..3);
        let params = random_params(q, 2.0 + 5.0 * r.random::<f64>(), &mut r);
        let (f, s) = (params.f(), params.s());
        let built = s3_by_blocks(f, s.as_mat());
        assert!(max_abs(&(s3_matrix(f, s).as_mat() - &built)) < 1e-12);
        let lhs = built.determinant();
        let rhs = s.as_mat().determinant() * params.v().as_mat().determinant().powi(2);
        assert!(((lhs - rhs) / rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        assert!(validate2_direct(params.n(), f, s, 1e-10).is_ok());
    }
}

#[test]
fn direct_path_margin_mean_is_s() {
    let p = p2();
    let params = Iwar2DirectParams::new(6.0, p2_f(), p.s().clone()).unwrap();
    let sim = simulate_direct(&params, 100_000, &mut rng(31)).unwrap();
    assert_eq!(simulate_direct(&params, 0, &mut rng(1)).unwrap().path.len(), 1);
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let xs: Vec<f64> = sim.path.iter().map(|m| m[(i, j)]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = batch_se(&xs, 50);
        let want = p.s()[(i, j)];
        assert!((mean - want).abs() < 5.0 * se, "({i},{j}): {mean} vs {want}, se {se}");
        assert!((mean - want).abs() < 0.05 * p.s()[(i, i)]);
    }
}

#[test]
fn coupled_psi_process_is_stationary_at_innovation_mean() {
    let p = p2();
    let h = Mat::from_row_slice(2, 2, &[0.6, 0.0, 0.1, 0.3]);
    let params = Iwar2CoupledParams::new(6.0, p2_f(), p.s().clone(), h).unwrap();
    let sim = simulate_coupled(&params, 100_000, &mut rng(32)).unwrap();
    let want = p.v().scaled(6.0 / 8.0);
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let mean = sim.psi.iter().map(|m| m[(i, j)]).sum::<f64>() / sim.psi.len() as f64;
        assert!((mean - want[(i, j)]).abs() < 0.05 * want[(i, i)], "({i},{j}): {mean}");
    }
    assert!(sim.sigma.iter().all(|m| m.is_pd(0.0)));
}

#[test]
fn coupled_conditional_mean_matches_simulation() {
    let mut r = rng(33);
    for k in 0..5 {
        let q = 1 + k % 2;
        let base = random_params(q, 2.0 + 8.0 * r.random::<f64>(), &mut r);
        let h = Mat::from_fn(q, q, |i, j| if i == j { 0.7 * r.random::<f64>() } else { 0.1 * (r.random::<f64>() - 0.5) });
        let Ok(p) = Iwar2CoupledParams::new(base.n(), base.f().clone(), base.s().clone(), h) else { continue };
        let sigma = random_spd(q, &mut r);
        let psi = random_spd(q, &mut r);
        let est = mc_mean(|| coupled_step(&p, &sigma, &psi, &mut r).unwrap().sigma.into_mat(), 100_000).unwrap();
        let want = conditional_mean2(&p, &sigma, &psi).into_mat();
        assert!(est.within(&want, 5.0), "case {k}: {}", est.max_z(&want));
    }
}

#[test]
fn zero_coupling_mean_at_unit_inputs() {
    let one = SymMatrix::identity(1);
    let p = Iwar2CoupledParams::new(2.0, Mat::zeros(1, 1), one.clone(), Mat::zeros(1, 1)).unwrap();
    // c_{2,2} = 1/2, W = V = 1: (1/2)(1 + 1/2)(1 + 1/2)
    assert!((conditional_mean2(&p, &one, &one)[(0, 0)] - 1.125).abs() < 1e-15);
    let mut r = rng(34);
    let est = mc_mean(|| coupled_step(&p, &one, &one, &mut r).unwrap().sigma.into_mat(), 100_000).unwrap();
    assert!(est.within(&Mat::from_element(1, 1, 1.125), 5.0));
    let st = coupled_step(&p, &one, &one, &mut r).unwrap();
    assert!(st.sigma[(0, 0)] > 0.0 && st.psi[(0, 0)] > 0.0 && st.xi[(0, 0)] > 0.0);
}

#[test]
fn large_n_limit() {
    let p = p2();
    let h = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.2]);
    let big = Iwar2CoupledParams::new(1e6, p2_f(), p.s().clone(), h.clone()).unwrap();
    let sigma = SymMatrix::from_row_slice(2, &[1.3, 0.2, 0.2, 0.6]).unwrap();
    let psi = SymMatrix::from_row_slice(2, &[0.3, 0.05, 0.05, 0.5]).unwrap();
    let w = p.v().as_mat() - &h * p.v().as_mat() * h.transpose();
    let limit = p.f() * sigma.as_mat() * p.f().transpose() + &h * psi.as_mat() * h.transpose() + w;
    assert!(max_abs(&(conditional_mean2(&big, &sigma, &psi).into_mat() - limit)) < 1e-3);
}

#[test]
fn coupling_must_keep_w_pd() {
    let p = p2();
    assert_eq!(
        Iwar2CoupledParams::new(6.0, p2_f(), p.s().clone(), Mat::identity(2, 2)).unwrap_err(),
        Error::NotStationary(Condition::W)
    );
}
