//! Second-order processes.
//!
//! The direct construction reads `Σ_t` off the last diagonal block of an
//! `IW_{3q}(n+2, n S_3)` matrix whose leading `2q × 2q` block is
//! `Δ_{t-1}`. The coupled construction drives the additive innovation
//! `Ψ_t` of an IW-AR(1) by a second IW-AR(1).

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Condition, Error, Result};
use crate::iwar::{sample_innovations, ModelParams, VarPath};
use crate::matcore::{matnorm_sample_factored, CholeskyFactor, IWParams, Mat, SymMatrix, DEFAULT_PD_TOL};

/// Parameters of the direct construction with `G = F S` and `H = F^2 S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwar2DirectParams {
    base: ModelParams,
    s2: SymMatrix,
    s3: SymMatrix,
    omega_law: IWParams,
    delta_law: IWParams,
    gamma_mean: Mat,
    // factor of (n S_2)^{-1}
    col_chol: CholeskyFactor,
}

fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let q = a.nrows();
    let mut m = Mat::zeros(2 * q, 2 * q);
    m.view_mut((0, 0), (q, q)).copy_from(a);
    m.view_mut((0, q), (q, q)).copy_from(b);
    m.view_mut((q, 0), (q, q)).copy_from(c);
    m.view_mut((q, q), (q, q)).copy_from(d);
    m
}

/// `[[S, SF'], [FS, S]]`, the stationary scale of a lagged pair.
pub fn lagged_pair_scale(f: &Mat, s: &SymMatrix) -> SymMatrix {
    let g = f * s.as_mat();
    SymMatrix::symmetrize(block2(s.as_mat(), &g.transpose(), &g, s.as_mat()))
}

/// `S_3` with blocks `S`, `G = FS`, `H = F^2 S`.
pub fn s3_matrix(f: &Mat, s: &SymMatrix) -> SymMatrix {
    let q = s.dim();
    let g = f * s.as_mat();
    let h = f * &g;
    let mut m = Mat::zeros(3 * q, 3 * q);
    let blocks = [[s.as_mat().clone(), g.transpose(), h.transpose()], [g.clone(), s.as_mat().clone(), g.transpose()], [h, g, s.as_mat().clone()]];
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            m.view_mut((i * q, j * q), (q, q)).copy_from(b);
        }
    }
    SymMatrix::symmetrize(m)
}

/// Relative error of `|S_3| = |S| |S - FSF'|^2`.
pub fn determinant_identity_residual(f: &Mat, s: &SymMatrix) -> Result<f64> {
    let v = s.congruence_sub(f);
    let lhs = s3_matrix(f, s).cholesky(DEFAULT_PD_TOL)?.log_det();
    let rhs = s.cholesky(DEFAULT_PD_TOL)?.log_det() + 2.0 * v.cholesky(DEFAULT_PD_TOL)?.log_det();
    Ok(libm::expm1(lhs - rhs).abs())
}

pub fn validate2_direct(n: f64, f: &Mat, s: &SymMatrix, tol: f64) -> Result<()> {
    crate::iwar::validate(n, f, s, tol)?;
    let resid = determinant_identity_residual(f, s).map_err(|_| Error::NotStationary(Condition::V))?;
    if resid > 1e-8 {
        return Err(Error::NumericalInconsistency("|S_3| differs from |S||S - FSF'|^2"));
    }
    Ok(())
}

impl Iwar2DirectParams {
    pub fn new(n: f64, f: Mat, s: SymMatrix) -> Result<Self> {
        validate2_direct(n, &f, &s, DEFAULT_PD_TOL)?;
        let q = s.dim();
        let base = ModelParams::new(n, f, s)?;
        let s2 = lagged_pair_scale(base.f(), base.s());
        let s3 = s3_matrix(base.f(), base.s());
        let omega_law = IWParams::new(n + 2.0 + 2.0 * q as f64, base.v().scaled(n))?;
        let delta_law = IWParams::new(n + 2.0, s2.scaled(n))?;
        let mut gamma_mean = Mat::zeros(q, 2 * q);
        gamma_mean.view_mut((0, q), (q, q)).copy_from(base.f());
        let col_chol = s2.scaled(n).cholesky(DEFAULT_PD_TOL)?.inverse().cholesky(DEFAULT_PD_TOL)?;
        Ok(Iwar2DirectParams { base, s2, s3, omega_law, delta_law, gamma_mean, col_chol })
    }

    pub fn base(&self) -> &ModelParams {
        &self.base
    }

    pub fn n(&self) -> f64 {
        self.base.n()
    }

    pub fn q(&self) -> usize {
        self.base.q()
    }

    pub fn g(&self) -> Mat {
        self.base.f() * self.base.s().as_mat()
    }

    pub fn h(&self) -> Mat {
        self.base.f() * self.g()
    }

    pub fn s2(&self) -> &SymMatrix {
        &self.s2
    }

    pub fn s3(&self) -> &SymMatrix {
        &self.s3
    }

    /// `IW_q(n+2+2q, n(S - FSF'))`.
    pub fn omega_law(&self) -> &IWParams {
        &self.omega_law
    }

    /// `IW_{2q}(n+2, n S_2)`, the law of every `Δ_t`.
    pub fn delta_law(&self) -> &IWParams {
        &self.delta_law
    }

    /// `[0 F]`, the mean of `Γ_t`.
    pub fn gamma_mean(&self) -> &Mat {
        &self.gamma_mean
    }
}

/// Output of [`simulate_direct`]. `latent[t]` is `φ_t`, the off-diagonal
/// block of `Δ_t` linking `Σ_{t-1}` and `Σ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectSimulation {
    pub sigma_minus1: SymMatrix,
    pub path: VarPath,
    pub latent: Vec<Mat>,
}

fn split_delta(delta: &SymMatrix, q: usize) -> (SymMatrix, Mat, SymMatrix) {
    let m = delta.as_mat();
    let a = SymMatrix::symmetrize(m.view((0, 0), (q, q)).into_owned());
    let phi = m.view((q, 0), (q, q)).into_owned();
    let b = SymMatrix::symmetrize(m.view((q, q), (q, q)).into_owned());
    (a, phi, b)
}

pub fn simulate_direct<R: Rng + ?Sized>(p: &Iwar2DirectParams, horizon: usize, rng: &mut R) -> Result<DirectSimulation> {
    let q = p.q();
    let delta0 = p.delta_law.sample(rng)?;
    let (sigma_minus1, phi0, sigma0) = split_delta(&delta0, q);
    let mut mats = Vec::with_capacity(horizon + 1);
    let mut latent = Vec::with_capacity(horizon + 1);
    let mut delta = delta0;
    mats.push(sigma0);
    latent.push(phi0);
    for _ in 0..horizon {
        let omega = p.omega_law.sample(rng)?;
        let omega_chol = omega.cholesky(DEFAULT_PD_TOL)?;
        let gamma = matnorm_sample_factored(&p.gamma_mean, &omega_chol, &p.col_chol, rng);
        let sigma = &omega + &delta.congruence(&gamma);
        let g1 = gamma.columns(0, q);
        let g2 = gamma.columns(q, q);
        let phi_prev = latent.last().expect("non-empty");
        let sigma_prev = mats.last().expect("non-empty");
        let phi = g1 * phi_prev.transpose() + g2 * sigma_prev.as_mat();
        delta = SymMatrix::symmetrize(block2(sigma_prev.as_mat(), &phi.transpose(), &phi, sigma.as_mat()));
        mats.push(sigma);
        latent.push(phi);
    }
    Ok(DirectSimulation { sigma_minus1, path: VarPath::new(mats)?, latent })
}

/// Parameters of the coupled construction: `Σ_t = Ψ_t + Υ_t Σ_{t-1} Υ_t'`
/// with `{n, F, S}` and `Ψ_t = Ξ_t + Φ_t Ψ_{t-1} Φ_t'` driven by an IW-AR(1)
/// with dof parameter `n + q`, AR matrix `H` and margin `IW_q(n+q+2, nV)`,
/// the law of the additive innovation in the first-order process.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwar2CoupledParams {
    sigma_level: ModelParams,
    psi_level: ModelParams,
    w: SymMatrix,
    v_chol: CholeskyFactor,
}

impl Iwar2CoupledParams {
    pub fn new(n: f64, f: Mat, s: SymMatrix, h: Mat) -> Result<Self> {
        let sigma_level = ModelParams::new(n, f, s)?;
        let q = sigma_level.q() as f64;
        let v = sigma_level.v().clone();
        let w = v.congruence_sub(&h);
        if h.shape() != sigma_level.f().shape() {
            return Err(Error::DimensionMismatch { expected: sigma_level.q(), found: h.nrows() });
        }
        if !w.is_pd(DEFAULT_PD_TOL) {
            return Err(Error::NotStationary(Condition::W));
        }
        // scale n V / (n + q) gives Ξ_t ~ IW(n+2q+2, nW) and Φ_t | Ξ_t ~ N(H, Ξ_t, (nV)^{-1})
        let psi_level = ModelParams::new(n + q, h, v.scaled(n / (n + q))).map_err(|e| match e {
            Error::NotStationary(_) => Error::NotStationary(Condition::W),
            other => other,
        })?;
        let v_chol = v.cholesky(DEFAULT_PD_TOL)?;
        Ok(Iwar2CoupledParams { sigma_level, psi_level, w, v_chol })
    }

    pub fn sigma_level(&self) -> &ModelParams {
        &self.sigma_level
    }

    pub fn psi_level(&self) -> &ModelParams {
        &self.psi_level
    }

    pub fn n(&self) -> f64 {
        self.sigma_level.n()
    }

    pub fn q(&self) -> usize {
        self.sigma_level.q()
    }

    pub fn h(&self) -> &Mat {
        self.psi_level.f()
    }

    pub fn v(&self) -> &SymMatrix {
        self.sigma_level.v()
    }

    /// `W = V - H V H'`.
    pub fn w(&self) -> &SymMatrix {
        &self.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStep {
    pub sigma: SymMatrix,
    pub psi: SymMatrix,
    pub ups: Mat,
    pub phi: Mat,
    pub xi: SymMatrix,
}

pub fn coupled_step<R: Rng + ?Sized>(
    p: &Iwar2CoupledParams,
    sigma_prev: &SymMatrix,
    psi_prev: &SymMatrix,
    rng: &mut R,
) -> Result<CoupledStep> {
    let inner = sample_innovations(&p.psi_level, rng)?;
    let psi = inner.apply(psi_prev);
    let psi_chol = psi.cholesky(DEFAULT_PD_TOL)?;
    let ups = matnorm_sample_factored(p.sigma_level.f(), &psi_chol, p.sigma_level.ups_col_chol(), rng);
    let sigma = &psi + &sigma_prev.congruence(&ups);
    Ok(CoupledStep { sigma, psi, ups, phi: inner.ups, xi: inner.psi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSimulation {
    pub sigma: VarPath,
    pub psi: VarPath,
}

/// Starts from independent draws `Σ_0 ~ IW_q(n+2, nS)` and
/// `Ψ_0 ~ IW_q(n+q+2, nV)`.
pub fn simulate_coupled<R: Rng + ?Sized>(p: &Iwar2CoupledParams, horizon: usize, rng: &mut R) -> Result<CoupledSimulation> {
    let mut sig = Vec::with_capacity(horizon + 1);
    let mut psi = Vec::with_capacity(horizon + 1);
    sig.push(crate::iwar::stationary_margin(&p.sigma_level).sample(rng)?);
    psi.push(crate::iwar::stationary_margin(&p.psi_level).sample(rng)?);
    for t in 0..horizon {
        let st = coupled_step(p, &sig[t], &psi[t], rng)?;
        sig.push(st.sigma);
        psi.push(st.psi);
    }
    Ok(CoupledSimulation { sigma: VarPath::new(sig)?, psi: VarPath::new(psi)? })
}

/// `E[Ψ_t | Ψ_{t-1}] = H Ψ H' + c_{n,2q} W (1 + tr(Ψ (nV)^{-1}))`.
pub fn psi_conditional_mean(p: &Iwar2CoupledParams, psi_prev: &SymMatrix) -> SymMatrix {
    let n = p.n();
    let c = n / (n + 2.0 * p.q() as f64);
    let tr = p.v_chol.trace_solve(psi_prev.as_mat()) / n;
    &psi_prev.congruence(p.h()) + &p.w.scaled(c * (1.0 + tr))
}

/// `E[Σ_t | Σ_{t-1}, Ψ_{t-1}] = F Σ F' + E[Ψ_t | Ψ_{t-1}] (1 + tr(Σ (nS)^{-1}))`.
pub fn conditional_mean2(p: &Iwar2CoupledParams, sigma_prev: &SymMatrix, psi_prev: &SymMatrix) -> SymMatrix {
    let k = 1.0 + p.sigma_level.trace_ns_inv(sigma_prev);
    &sigma_prev.congruence(p.sigma_level.f()) + &psi_conditional_mean(p, psi_prev).scaled(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::Vector;
    use proptest::prelude::*;

    fn p2_parts() -> (Mat, SymMatrix) {
        (
            Mat::from_diagonal(&Vector::from_column_slice(&[0.9, 0.5])),
            SymMatrix::from_row_slice(2, &[1.0, 0.3, 0.3, 1.0]).unwrap(),
        )
    }

    #[test]
    fn zero_coupling_s3_is_block_diagonal() {
        let (_, s) = p2_parts();
        let s3 = s3_matrix(&Mat::zeros(2, 2), &s);
        let d = s.as_mat().determinant();
        assert!((s3.as_mat().determinant() - d * d * d).abs() < 1e-12);
        assert!(Iwar2DirectParams::new(6.0, Mat::zeros(2, 2), s).is_ok());
    }

    #[test]
    fn direct_validation() {
        let (f, s) = p2_parts();
        assert!(determinant_identity_residual(&f, &s).unwrap() < 1e-8);
        assert!(Iwar2DirectParams::new(6.0, f, s.clone()).is_ok());
        assert_eq!(
            validate2_direct(6.0, &Mat::identity(2, 2), &s, DEFAULT_PD_TOL),
            Err(Error::NotStationary(Condition::V))
        );
    }

    #[test]
    fn zero_horizon_is_single_draw() {
        let (f, s) = p2_parts();
        let p = Iwar2DirectParams::new(6.0, f, s).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let sim = simulate_direct(&p, 0, &mut rng).unwrap();
        assert_eq!(sim.path.len(), 1);
        assert_eq!(sim.latent.len(), 1);
    }

    #[test]
    fn coupled_w_must_be_pd() {
        let (f, s) = p2_parts();
        assert_eq!(
            Iwar2CoupledParams::new(6.0, f, s, Mat::identity(2, 2)).err(),
            Some(Error::NotStationary(Condition::W))
        );
    }

    #[test]
    fn scalar_conditional_mean2_substitution() {
        // n = 2, f = h = 0, s = 1: c = 1/2, W = V = 1, and both traces equal 1/2
        let p = Iwar2CoupledParams::new(2.0, Mat::zeros(1, 1), SymMatrix::identity(1), Mat::zeros(1, 1)).unwrap();
        let one = SymMatrix::identity(1);
        let m = conditional_mean2(&p, &one, &one);
        assert!((m[(0, 0)] - 0.5 * 1.5 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn coupled_step_smoke() {
        let p = Iwar2CoupledParams::new(3.0, Mat::from_element(1, 1, 0.6), SymMatrix::identity(1), Mat::from_element(1, 1, 0.4)).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let one = SymMatrix::identity(1);
        for _ in 0..50 {
            let st = coupled_step(&p, &one, &one, &mut rng).unwrap();
            assert!(st.sigma[(0, 0)] > 0.0 && st.psi[(0, 0)] > 0.0 && st.xi[(0, 0)] > 0.0);
        }
    }

    #[test]
    fn large_n_limit() {
        let (f, s) = p2_parts();
        let h = Mat::from_row_slice(2, 2, &[0.4, 0.1, -0.1, 0.3]);
        let p = Iwar2CoupledParams::new(1e6, f.clone(), s.clone(), h.clone()).unwrap();
        let sigma = SymMatrix::from_row_slice(2, &[1.3, 0.2, 0.2, 0.8]).unwrap();
        let psi = SymMatrix::from_row_slice(2, &[0.3, 0.05, 0.05, 0.6]).unwrap();
        let lim = &(&(p.w().clone()) + &sigma.congruence(&f)) + &psi.congruence(&h);
        assert!(conditional_mean2(&p, &sigma, &psi).max_abs_diff(&lim) < 1e-3);
    }

    proptest! {
        #[test]
        fn determinant_identity_holds(n in 0.5f64..20.0, fv in proptest::collection::vec(-0.6f64..0.6, 4), a in 0.2f64..3.0, b in -0.9f64..0.9) {
            let f = Mat::from_row_slice(2, 2, &fv);
            let s = SymMatrix::from_row_slice(2, &[a, b * a.sqrt(), b * a.sqrt(), 1.0]).unwrap();
            prop_assume!(crate::iwar::validate(n, &f, &s, DEFAULT_PD_TOL).is_ok());
            prop_assert!(determinant_identity_residual(&f, &s).unwrap() < 1e-8);
        }
    }
}
