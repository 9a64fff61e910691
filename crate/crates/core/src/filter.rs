//! Moment-matched forward filtering of the augmented state
//! `Δ_t = [[Σ_{t-1}, Σ_{t-1} Υ_t'], [Υ_t Σ_{t-1}, Σ_t]]` given `y_t = (z_t, x_t)`,
//! and the two likelihoods used by the hyperparameter move.
//!
//! Step `t` (1-based) uses the degree of freedom `r_{t-1}` of the schedule,
//! so the first step starts from `r_0 = n + 2` and is exact.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::iwar::{conditional_mean, ModelParams};
use crate::matcore::{
    ln_gamma, mvt_logpdf_factored, CholeskyFactor, IWParams, Mat, SymMatrix, Vector, DEFAULT_PD_TOL,
};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// `r_t = decay * r_{t-1} + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofSchedule {
    pub r0: f64,
    pub decay: f64,
    pub offset: f64,
}

impl DofSchedule {
    pub fn new(r0: f64, decay: f64, offset: f64) -> Result<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::InvalidParameter("schedule decay must lie in (0, 1]"));
        }
        if !(r0 > 2.0) || !r0.is_finite() {
            return Err(Error::ScheduleBelowMinimum { t: 0, value: r0 });
        }
        Ok(DofSchedule { r0, decay, offset })
    }

    /// `r_0 = n + 2` with the given decay and offset.
    pub fn for_model(n: f64, decay: f64, offset: f64) -> Result<Self> {
        Self::new(n + 2.0, decay, offset)
    }

    /// `r_{0:len-1}`.
    pub fn values(&self, len: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut r = self.r0;
        for t in 0..len {
            if !(r > 2.0) || !r.is_finite() {
                return Err(Error::ScheduleBelowMinimum { t, value: r });
            }
            out.push(r);
            r = self.decay * r + self.offset;
        }
        Ok(out)
    }
}

/// `r_{0:T}` with `r_0 = n + 2`.
pub fn dof_schedule(n: f64, horizon: usize, decay: f64, offset: f64) -> Result<Vec<f64>> {
    if !(n > 0.0) {
        return Err(Error::InvalidDof { dof: n, min: 0.0 });
    }
    DofSchedule::for_model(n, decay, offset)?.values(horizon + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedObs {
    pub z: Vector,
    pub x: Vector,
}

impl AugmentedObs {
    pub fn new(z: Vector, x: Vector) -> Result<Self> {
        if z.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), found: x.len() });
        }
        if z.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("observations must be finite"));
        }
        Ok(AugmentedObs { z, x })
    }

    /// `y = (z', x')'`.
    pub fn stacked(&self) -> Vector {
        let q = self.z.len();
        Vector::from_fn(2 * q, |i, _| if i < q { self.z[i] } else { self.x[i - q] })
    }
}

/// Filter output at one time step, with the factorizations needed to draw
/// `(Σ_{t-1}, Υ̃_t, Ψ̃_t)` given `Σ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    /// Predictive dof `r` used at this step; the update has `r + 1`.
    pub r: f64,
    pub s: SymMatrix,
    pub g11: SymMatrix,
    pub g21: Mat,
    pub g22: SymMatrix,
    g22_chol: CholeskyFactor,
    /// `G21' G22^{-1}`.
    ups_mean: Mat,
    psi_law: IWParams,
    // factor of G22^{-1}
    col_chol: CholeskyFactor,
}

impl FilterStep {
    /// `G = [[G11, G21'], [G21, G22]]`.
    pub fn g(&self) -> SymMatrix {
        let q = self.s.dim();
        let mut m = Mat::zeros(2 * q, 2 * q);
        m.view_mut((0, 0), (q, q)).copy_from(self.g11.as_mat());
        m.view_mut((0, q), (q, q)).copy_from(&self.g21.transpose());
        m.view_mut((q, 0), (q, q)).copy_from(&self.g21);
        m.view_mut((q, q), (q, q)).copy_from(self.g22.as_mat());
        SymMatrix::symmetrize(m)
    }

    /// The filtered law `g_{t|t} = IW_{2q}(r + 1, G)`.
    pub fn posterior(&self) -> Result<IWParams> {
        IWParams::new(self.r + 1.0, self.g())
    }

    /// `IW_q(r + 1, G22)`, the filtered margin of `Σ_t`.
    pub fn sigma_law(&self) -> IWParams {
        IWParams::new(self.r + 1.0, self.g22.clone()).expect("validated filter step")
    }

    /// `IW_q(r + 1 + q, G11 - G21' G22^{-1} G21)`.
    pub fn rev_psi_law(&self) -> &IWParams {
        &self.psi_law
    }

    pub fn rev_ups_mean(&self) -> &Mat {
        &self.ups_mean
    }

    /// Factor of `G22^{-1}`, the column covariance of `Υ̃_t`.
    pub fn rev_ups_col_chol(&self) -> &CholeskyFactor {
        &self.col_chol
    }

    pub fn g22_chol(&self) -> &CholeskyFactor {
        &self.g22_chol
    }
}

/// One forward step from `S_{t-1}` given `y_t` and predictive dof `r`.
pub fn ff_step(params: &ModelParams, s_prev: &SymMatrix, y: &AugmentedObs, r: f64) -> Result<FilterStep> {
    if !(r > 2.0) {
        return Err(Error::ScheduleBelowMinimum { t: 0, value: r });
    }
    let q = params.q();
    if y.z.len() != q || s_prev.dim() != q {
        return Err(Error::DimensionMismatch { expected: q, found: y.z.len() });
    }
    let pred = conditional_mean(params, s_prev);
    let xx = SymMatrix::symmetrize(&y.x * y.x.transpose());
    let zz = SymMatrix::symmetrize(&y.z * y.z.transpose());
    let s = (&pred.scaled(r - 2.0) + &xx).scaled(1.0 / (r - 1.0));
    let g11 = &s_prev.scaled(r - 2.0) + &zz;
    let g21 = params.f() * s_prev.as_mat() * (r - 2.0) + &y.x * y.z.transpose();
    let g22 = s.scaled(r - 1.0);
    if !s.is_pd(DEFAULT_PD_TOL) {
        return Err(Error::NotPositiveDefinite);
    }
    let g22_chol = g22.cholesky(DEFAULT_PD_TOL)?;
    let solved = g22_chol.solve(&g21);
    let ups_mean = solved.transpose();
    let schur = SymMatrix::symmetrize(g11.as_mat() - g21.transpose() * &solved);
    let psi_law = IWParams::new(r + 1.0 + q as f64, schur)?;
    let col_chol = g22_chol.inverse().cholesky(DEFAULT_PD_TOL)?;
    Ok(FilterStep { r, s, g11, g21, g22, g22_chol, ups_mean, psi_law, col_chol })
}

/// Filter output for `t = 1..T`; `step(t)` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCache {
    pub s0: SymMatrix,
    steps: Vec<FilterStep>,
}

impl FilterCache {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, t: usize) -> &FilterStep {
        &self.steps[t - 1]
    }

    pub fn steps(&self) -> &[FilterStep] {
        &self.steps
    }
}

/// Runs [`ff_step`] for `t = 1..T` from `S_0 = S`, using `r_{t-1}` at step `t`.
pub fn forward_filter(params: &ModelParams, ys: &[AugmentedObs], schedule: &DofSchedule) -> Result<FilterCache> {
    let rs = schedule.values(ys.len())?;
    let s0 = params.s().clone();
    let mut steps: Vec<FilterStep> = Vec::with_capacity(ys.len());
    for (t, y) in ys.iter().enumerate() {
        let prev = steps.last().map(|st| &st.s).unwrap_or(&s0);
        let st = ff_step(params, prev, y, rs[t]).map_err(|e| match e {
            Error::ScheduleBelowMinimum { value, .. } => Error::ScheduleBelowMinimum { t, value },
            other => other,
        })?;
        steps.push(st);
    }
    Ok(FilterCache { s0, steps })
}

/// Per-step terms of `log p(x_{1:T} | z_{1:T}, F, S)`: each `x_t` is
/// multivariate t with `n + q + 2` degrees of freedom, location `F z_t` and
/// scale `(1 + z_t' (nS)^{-1} z_t) nV / (n + q + 2)`.
pub fn loglik_x_given_z_terms(params: &ModelParams, xs: &[Vector], zs: &[Vector]) -> Result<Vec<f64>> {
    if xs.len() != zs.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: zs.len() });
    }
    let q = params.q() as f64;
    let n = params.n();
    let nu = n + q + 2.0;
    let base = params.v().scaled(n / nu).cholesky(DEFAULT_PD_TOL)?;
    let base_logdet = base.log_det();
    let mut out = Vec::with_capacity(xs.len());
    for (x, z) in xs.iter().zip(zs) {
        let k = 1.0 + params.s_chol().quad_form(z) / n;
        let mu = params.f() * z;
        // scale k * base: quadratic form divides by k, log det adds q ln k
        let delta = base.quad_form(&(x - &mu)) / k;
        let logdet = base_logdet + q * k.ln();
        out.push(
            crate::matcore::mvt_log_norm_const(params.q(), nu) - 0.5 * logdet - 0.5 * (nu + q) * (delta / nu).ln_1p(),
        );
    }
    Ok(out)
}

pub fn loglik_x_given_z(params: &ModelParams, xs: &[Vector], zs: &[Vector]) -> Result<f64> {
    Ok(loglik_x_given_z_terms(params, xs, zs)?.iter().sum())
}

/// Reference evaluation of one term of [`loglik_x_given_z`] through
/// [`crate::matcore::mvt_logpdf`], with the scale matrix formed explicitly.
pub fn loglik_x_given_z_term_direct(params: &ModelParams, x: &Vector, z: &Vector) -> Result<f64> {
    let q = params.q() as f64;
    let n = params.n();
    let nu = n + q + 2.0;
    let k = 1.0 + params.s_chol().quad_form(z) / n;
    let scale = params.v().scaled(k * n / nu);
    let c = scale.cholesky(DEFAULT_PD_TOL)?;
    Ok(mvt_logpdf_factored(x, nu, &(params.f() * z), &c))
}

/// Per-step terms of the approximate `log p(z_{1:T} | F, S)` from the
/// moment-matched filter on `Σ_t` alone, starting at `Σ̄_{0|0} = S`.
pub fn loglik_z_approx_terms(params: &ModelParams, zs: &[Vector], schedule: &DofSchedule) -> Result<Vec<f64>> {
    let rs = schedule.values(zs.len())?;
    let q = params.q();
    let qf = q as f64;
    let mut bar = params.s().clone();
    let mut out = Vec::with_capacity(zs.len());
    for (t, z) in zs.iter().enumerate() {
        if z.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: z.len() });
        }
        let r = rs[t];
        let a = bar.scaled(r - 2.0);
        let ac = a.cholesky(DEFAULT_PD_TOL)?;
        let ld_a = ac.log_det();
        // |A + zz'| = |A| (1 + z' A^{-1} z)
        let ld_b = ld_a + ac.quad_form(z).ln_1p();
        out.push(
            0.5 * (r + qf - 1.0) * ld_a - 0.5 * (r + qf) * ld_b + ln_gamma(0.5 * (r + qf))
                - ln_gamma(0.5 * r)
                - 0.5 * qf * LN_PI,
        );
        let updated = (&a + &SymMatrix::symmetrize(z * z.transpose())).scaled(1.0 / (r - 1.0));
        bar = conditional_mean(params, &updated);
    }
    Ok(out)
}

pub fn loglik_z_approx(params: &ModelParams, zs: &[Vector], schedule: &DofSchedule) -> Result<f64> {
    Ok(loglik_z_approx_terms(params, zs, schedule)?.iter().sum())
}
