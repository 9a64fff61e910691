//! The first-order inverse Wishart autoregressive process
//!
//! `Σ_t = Ψ_t + Υ_t Σ_{t-1} Υ_t'` with `Ψ_t ~ IW_q(n+q+2, nV)`,
//! `Υ_t | Ψ_t ~ N(F, Ψ_t, (nS)^{-1})` and `V = S - F S F'`. The process is
//! strictly stationary with margin `IW_q(n+2, nS)`.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use nalgebra::SymmetricEigen;
use rand::Rng;

use crate::error::{Condition, Error, Result};
use crate::matcore::{
    matnorm_sample_factored, max_abs, CholeskyFactor, IWParams, Mat, MatNormParams, SymMatrix, Vector,
    DEFAULT_PD_TOL,
};

/// Parameters `(n, F, S)` of a stationary IW-AR(1) process.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n: f64,
    f: Mat,
    s: SymMatrix,
    v: SymMatrix,
    s_chol: CholeskyFactor,
    // factor of (nS)^{-1}, the column covariance of Υ_t
    col_chol: CholeskyFactor,
    psi_law: IWParams,
}

/// Checks that `S` and `V = S - F S F'` are positive definite at tolerance `tol`.
pub fn validate(n: f64, f: &Mat, s: &SymMatrix, tol: f64) -> Result<()> {
    check_shapes(n, f, s)?;
    if !s.is_pd(tol) {
        return Err(Error::NotStationary(Condition::S));
    }
    if !s.congruence_sub(f).is_pd(tol) {
        return Err(Error::NotStationary(Condition::V));
    }
    Ok(())
}

fn check_shapes(n: f64, f: &Mat, s: &SymMatrix) -> Result<()> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidDof { dof: n, min: 0.0 });
    }
    let q = s.dim();
    if f.nrows() != q || f.ncols() != q {
        return Err(Error::DimensionMismatch { expected: q, found: if f.nrows() != q { f.nrows() } else { f.ncols() } });
    }
    Ok(())
}

impl SymMatrix {
    /// `self - A self A'`.
    pub fn congruence_sub(&self, a: &Mat) -> SymMatrix {
        &(*self).clone() - &self.congruence(a)
    }
}

impl ModelParams {
    pub fn new(n: f64, f: Mat, s: SymMatrix) -> Result<Self> {
        Self::with_tol(n, f, s, DEFAULT_PD_TOL)
    }

    pub fn with_tol(n: f64, f: Mat, s: SymMatrix, tol: f64) -> Result<Self> {
        validate(n, &f, &s, tol)?;
        let q = s.dim() as f64;
        let v = s.congruence_sub(&f);
        let s_chol = s.cholesky(tol)?;
        let col_chol = s.scaled(n).cholesky(tol)?.inverse().cholesky(tol)?;
        let psi_law = IWParams::new(n + q + 2.0, v.scaled(n)).map_err(|_| Error::NotStationary(Condition::V))?;
        Ok(ModelParams { n, f, s, v, s_chol, col_chol, psi_law })
    }

    /// Re-runs [`validate`] at a caller-chosen tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        validate(self.n, &self.f, &self.s, tol)
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn q(&self) -> usize {
        self.s.dim()
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    pub fn s(&self) -> &SymMatrix {
        &self.s
    }

    pub fn v(&self) -> &SymMatrix {
        &self.v
    }

    pub fn s_chol(&self) -> &CholeskyFactor {
        &self.s_chol
    }

    /// `c_{n,q} = n / (n + q)`.
    pub fn c(&self) -> f64 {
        self.n / (self.n + self.q() as f64)
    }

    /// Law of the additive innovation, `IW_q(n+q+2, nV)`.
    pub fn psi_law(&self) -> &IWParams {
        &self.psi_law
    }

    /// Factor of the column covariance `(nS)^{-1}` of `Υ_t`.
    pub fn ups_col_chol(&self) -> &CholeskyFactor {
        &self.col_chol
    }

    pub fn ups_law(&self, psi: &SymMatrix) -> Result<MatNormParams> {
        MatNormParams::new(self.f.clone(), psi.clone(), self.col_chol.reconstruct())
    }

    /// `tr(Σ (nS)^{-1})`.
    pub fn trace_ns_inv(&self, sigma: &SymMatrix) -> f64 {
        self.s_chol.trace_solve(sigma.as_mat()) / self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// One innovation pair. Forward pairs map `Σ_{t-1}` to `Σ_t`; reverse pairs
/// map `Σ_t` to `Σ_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovations {
    pub ups: Mat,
    pub psi: SymMatrix,
    pub direction: Direction,
}

impl Innovations {
    /// `Ψ + Υ Σ Υ'`.
    pub fn apply(&self, sigma: &SymMatrix) -> SymMatrix {
        &self.psi + &sigma.congruence(&self.ups)
    }
}

/// A path `Σ_{0:T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarPath {
    mats: Vec<SymMatrix>,
}

impl VarPath {
    pub fn new(mats: Vec<SymMatrix>) -> Result<Self> {
        let q = match mats.first() {
            Some(m) => m.dim(),
            None => return Err(Error::InvalidParameter("a path holds at least Σ_0")),
        };
        for m in &mats {
            if m.dim() != q {
                return Err(Error::DimensionMismatch { expected: q, found: m.dim() });
            }
            if !m.is_pd(DEFAULT_PD_TOL) {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(VarPath { mats })
    }

    pub(crate) fn from_vec_unchecked(mats: Vec<SymMatrix>) -> Self {
        VarPath { mats }
    }

    pub(crate) fn mats_mut(&mut self) -> &mut [SymMatrix] {
        &mut self.mats
    }

    pub fn start_index(&self) -> usize {
        0
    }

    /// Final time index `T`.
    pub fn horizon(&self) -> usize {
        self.mats.len() - 1
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn get(&self, t: usize) -> &SymMatrix {
        &self.mats[t]
    }

    pub fn mats(&self) -> &[SymMatrix] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<SymMatrix> {
        self.mats
    }

    pub fn iter(&self) -> core::slice::Iter<'_, SymMatrix> {
        self.mats.iter()
    }
}

/// Stationary margin `IW_q(n+2, nS)`.
pub fn stationary_margin(params: &ModelParams) -> IWParams {
    IWParams::new(params.n + 2.0, params.s.scaled(params.n)).expect("validated parameters")
}

pub fn sample_innovations<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<Innovations> {
    let psi = params.psi_law.sample(rng)?;
    let psi_chol = psi.cholesky(DEFAULT_PD_TOL)?;
    let ups = matnorm_sample_factored(&params.f, &psi_chol, &params.col_chol, rng);
    Ok(Innovations { ups, psi, direction: Direction::Forward })
}

/// `Σ_t = Ψ_t + Υ_t Σ_{t-1} Υ_t'`.
pub fn step(sigma_prev: &SymMatrix, inn: &Innovations) -> SymMatrix {
    debug_assert_eq!(inn.direction, Direction::Forward);
    inn.apply(sigma_prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub path: VarPath,
    pub innovations: Vec<Innovations>,
}

/// Simulates `Σ_{0:T}`. Without `sigma0` the start is a stationary draw.
pub fn simulate<R: Rng + ?Sized>(
    params: &ModelParams,
    horizon: usize,
    sigma0: Option<&SymMatrix>,
    rng: &mut R,
) -> Result<Simulation> {
    let start = match sigma0 {
        Some(s0) => {
            if s0.dim() != params.q() {
                return Err(Error::DimensionMismatch { expected: params.q(), found: s0.dim() });
            }
            if !s0.is_pd(DEFAULT_PD_TOL) {
                return Err(Error::NotPositiveDefinite);
            }
            s0.clone()
        }
        None => stationary_margin(params).sample(rng)?,
    };
    let mut mats = Vec::with_capacity(horizon + 1);
    let mut innovations = Vec::with_capacity(horizon);
    mats.push(start);
    for _ in 0..horizon {
        let inn = sample_innovations(params, rng)?;
        let next = step(mats.last().expect("non-empty"), &inn);
        mats.push(next);
        innovations.push(inn);
    }
    Ok(Simulation { path: VarPath::from_vec_unchecked(mats), innovations })
}

/// `E[Σ_t | Σ_{t-1}] = F Σ F' + c_{n,q} (1 + tr(Σ (nS)^{-1})) V`.
pub fn conditional_mean(params: &ModelParams, sigma_prev: &SymMatrix) -> SymMatrix {
    let k = params.c() * (1.0 + params.trace_ns_inv(sigma_prev));
    &sigma_prev.congruence(&params.f) + &params.v.scaled(k)
}

/// `E[Σ_t | Σ_0]`, exact, by iterating the affine one-step mean map.
pub fn conditional_mean_horizon(params: &ModelParams, sigma0: &SymMatrix, t: usize) -> SymMatrix {
    let mut m = sigma0.clone();
    for _ in 0..t {
        m = conditional_mean(params, &m);
    }
    m
}

/// The univariate process with `f` and `s` in place of `F` and `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarParams {
    pub n: f64,
    pub f: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMoments {
    pub mean_ups_sq: f64,
    pub mean_psi: f64,
    pub var_psi: f64,
    pub ar_coeff: f64,
}

impl ScalarParams {
    pub fn new(n: f64, f: f64, s: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidDof { dof: n, min: 0.0 });
        }
        if !(f.abs() < 1.0) {
            return Err(Error::NotStationary(Condition::V));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NotStationary(Condition::S));
        }
        Ok(ScalarParams { n, f, s })
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, Mat::from_element(1, 1, self.f), SymMatrix::from_diagonal(&[self.s]))
    }

    /// `(n f^2 + 1) / (n + 1)`, the autoregressive coefficient of `σ_t`.
    pub fn ar_coeff(&self) -> f64 {
        (self.n * self.f * self.f + 1.0) / (self.n + 1.0)
    }

    pub fn mean_ups_sq(&self) -> f64 {
        self.ar_coeff()
    }

    pub fn mean_psi(&self) -> f64 {
        self.n * self.s * (1.0 - self.f * self.f) / (self.n + 1.0)
    }

    pub fn var_psi(&self) -> Result<f64> {
        if !(self.n > 1.0) {
            return Err(Error::InvalidDof { dof: self.n, min: 1.0 });
        }
        let a = self.n * self.s * (1.0 - self.f * self.f);
        let b = self.n + 1.0;
        Ok(2.0 * a * a / (b * b * (self.n - 1.0)))
    }
}

pub fn scalar_moments(sp: &ScalarParams) -> Result<ScalarMoments> {
    Ok(ScalarMoments {
        mean_ups_sq: sp.mean_ups_sq(),
        mean_psi: sp.mean_psi(),
        var_psi: sp.var_psi()?,
        ar_coeff: sp.ar_coeff(),
    })
}

/// `E[σ_t | σ_0] = s + a^t (σ_0 - s)` with `a = (n f^2 + 1) / (n + 1)`.
pub fn scalar_conditional_mean(sp: &ScalarParams, sigma0: f64, t: u32) -> f64 {
    sp.s + sp.ar_coeff().powi(t as i32) * (sigma0 - sp.s)
}

/// The reverse-time process, an IW-AR(1) with `F̃ = S F' S^{-1}` and the
/// same `n` and `S`; its `V` is `Ṽ = S - S F' S^{-1} F S`.
pub fn reverse_params(params: &ModelParams) -> Result<ModelParams> {
    // F̃' = S^{-1} F S
    let ft = params.s_chol.solve(&(&params.f * params.s.as_mat())).transpose();
    ModelParams::new(params.n, ft, params.s.clone())
}

/// True iff `‖F S - S F'‖_max <= tol`.
pub fn is_reversible(params: &ModelParams, tol: f64) -> bool {
    let fs = &params.f * params.s.as_mat();
    max_abs(&(&fs - fs.transpose())) <= tol
}

/// Rotation `Σ̂_t = E' Σ_t E` to diagonal AR and scale matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDecomposition {
    pub rotated: ModelParams,
    pub e: Mat,
}

impl PrincipalDecomposition {
    pub fn r_diag(&self) -> Vector {
        self.rotated.f().diagonal()
    }

    pub fn q_diag(&self) -> Vector {
        self.rotated.s().as_mat().diagonal()
    }

    pub fn rotate(&self, sigma: &SymMatrix) -> SymMatrix {
        sigma.congruence(&self.e.transpose())
    }

    pub fn unrotate(&self, sigma: &SymMatrix) -> SymMatrix {
        sigma.congruence(&self.e)
    }
}

/// Finds orthogonal `E` with `F = E R E'`, `S = E Q E'` and `R`, `Q` diagonal.
///
/// Columns are ordered by decreasing `Q` entries (then decreasing `R`), and
/// each column's largest-magnitude component is positive.
pub fn principal_decompose(params: &ModelParams) -> Result<PrincipalDecomposition> {
    let f = params.f();
    let s = params.s().as_mat();
    let fnorm = f.norm();
    let snorm = s.norm();
    let tol = 1e-8 * fnorm.max(f64::MIN_POSITIVE) * snorm;
    if max_abs(&(f - f.transpose())) > tol.max(1e-12 * fnorm) {
        return Err(Error::NotCoDiagonalizable);
    }
    if max_abs(&(f * s - s * f)) > tol {
        return Err(Error::NotCoDiagonalizable);
    }
    let q = params.q();
    // a generic combination separates eigenvalues shared by only one of F and S
    let weights = [0.618_033_988_749_894_8, 1.414_213_562_373_095, 0.267_949_192_431_122_7];
    for w in weights {
        let c = if fnorm > 0.0 { w * snorm / fnorm } else { 0.0 };
        let comb = (s + f * c + (s + f * c).transpose()) * 0.5;
        let eig = SymmetricEigen::new(comb);
        let e = eig.eigenvectors;
        let r = e.transpose() * f * &e;
        let qm = e.transpose() * s * &e;
        let off = |m: &Mat| {
            let mut worst = 0.0f64;
            for i in 0..q {
                for j in 0..q {
                    if i != j {
                        worst = worst.max(m[(i, j)].abs());
                    }
                }
            }
            worst
        };
        if off(&r) > 1e-8 * fnorm.max(1.0) || off(&qm) > 1e-8 * snorm {
            continue;
        }
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| {
            qm[(b, b)]
                .partial_cmp(&qm[(a, a)])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(r[(b, b)].partial_cmp(&r[(a, a)]).unwrap_or(core::cmp::Ordering::Equal))
        });
        let mut e_sorted = Mat::zeros(q, q);
        for (k, &src) in order.iter().enumerate() {
            let mut col = e.column(src).into_owned();
            let mut imax = 0;
            for i in 1..q {
                if col[i].abs() > col[imax].abs() {
                    imax = i;
                }
            }
            if col[imax] < 0.0 {
                col = -col;
            }
            e_sorted.set_column(k, &col);
        }
        let rd: Vec<f64> = order.iter().map(|&i| r[(i, i)]).collect();
        let qd: Vec<f64> = order.iter().map(|&i| qm[(i, i)]).collect();
        let rotated = ModelParams::new(
            params.n(),
            Mat::from_diagonal(&Vector::from_vec(rd)),
            SymMatrix::from_diagonal(&qd),
        )?;
        return Ok(PrincipalDecomposition { rotated, e: e_sorted });
    }
    Err(Error::NotCoDiagonalizable)
}

/// Eigenvalues `θ_{t|0}` of `E[Σ_t | Σ_0]` when `Σ_0` shares the principal
/// eigenvectors: `θ_t = B^t θ_0 + (I - B)^{-1} (I - B^t) α` with
/// `α = c (I - R^2) ξ`, `B = c n^{-1} (I - R^2) ξ ξ_{-1}' + R^2`, `ξ = diag(Q)`.
pub fn eigen_mean_recursion(n: f64, r: &[f64], q: &[f64], theta0: &[f64], t: u32) -> Result<Vector> {
    let k = r.len();
    if q.len() != k || theta0.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: if q.len() != k { q.len() } else { theta0.len() } });
    }
    if !(n > 0.0) {
        return Err(Error::InvalidDof { dof: n, min: 0.0 });
    }
    if r.iter().any(|ri| !(ri.abs() < 1.0)) || q.iter().any(|qi| !(*qi > 0.0)) {
        return Err(Error::NotStationary(Condition::V));
    }
    let c = n / (n + k as f64);
    let u = Vector::from_fn(k, |i, _| (1.0 - r[i] * r[i]) * q[i]);
    let alpha = &u * c;
    let xi_inv = Vector::from_fn(k, |i, _| 1.0 / q[i]);
    let r2 = Mat::from_diagonal(&Vector::from_fn(k, |i, _| r[i] * r[i]));
    let b = &u * xi_inv.transpose() * (c / n) + r2;
    let bt = b.pow(t);
    let id = Mat::identity(k, k);
    let lu = (&id - &b).lu();
    let steady = lu
        .solve(&((&id - &bt) * &alpha))
        .ok_or(Error::NumericalInconsistency("I - B is singular"))?;
    Ok(bt * Vector::from_column_slice(theta0) + steady)
}

/// Marginal laws driving one diagonal or off-diagonal block of `Σ_t`
/// under a contiguous partition of the `q` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEvolution {
    pub rows: core::ops::Range<usize>,
    pub cols: core::ops::Range<usize>,
    /// Innovation dof `n + q + 2`.
    pub psi_dof: f64,
    /// `n V_ij`, the scale block of `Ψ_{t,ij}`.
    pub psi_scale: Mat,
    /// `F_i·`, the mean of the row block of `Υ_t` for block `i`.
    pub ups_mean: Mat,
    /// `(nS)^{-1}`, shared by every row block.
    pub ups_col_cov: SymMatrix,
}

impl BlockEvolution {
    /// Draws `Σ_{t,ii} = Ψ_{t,ii} + Υ_{t,i·} Σ_{t-1} Υ_{t,i·}'` for a diagonal block.
    pub fn sample_diagonal<R: Rng + ?Sized>(&self, sigma_prev: &SymMatrix, rng: &mut R) -> Result<SymMatrix> {
        if self.rows != self.cols {
            return Err(Error::IndexError);
        }
        let scale = SymMatrix::symmetrize(self.psi_scale.clone());
        let psi = IWParams::new(self.psi_dof, scale)?.sample(rng)?;
        let ups = MatNormParams::new(self.ups_mean.clone(), psi.clone(), self.ups_col_cov.clone())?.sample(rng);
        Ok(&psi + &sigma_prev.congruence(&ups))
    }
}

/// `sizes` lists the block sizes of the partition; `i` and `j` select blocks.
pub fn block_evolution_params(params: &ModelParams, sizes: &[usize], i: usize, j: usize) -> Result<BlockEvolution> {
    if sizes.iter().sum::<usize>() != params.q() || sizes.iter().any(|&s| s == 0) {
        return Err(Error::IndexError);
    }
    if i >= sizes.len() || j >= sizes.len() {
        return Err(Error::IndexError);
    }
    let start = |k: usize| sizes[..k].iter().sum::<usize>();
    let rows = start(i)..start(i) + sizes[i];
    let cols = start(j)..start(j) + sizes[j];
    let nv = params.v().scaled(params.n());
    let psi_scale = nv.as_mat().view((rows.start, cols.start), (rows.len(), cols.len())).into_owned();
    let ups_mean = params.f().rows(rows.start, rows.len()).into_owned();
    Ok(BlockEvolution {
        rows,
        cols,
        psi_dof: params.n() + params.q() as f64 + 2.0,
        psi_scale,
        ups_mean,
        ups_col_cov: params.ups_col_chol().reconstruct(),
    })
}
