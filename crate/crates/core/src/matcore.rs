//! Positive-definite matrix primitives and the matrix-variate distributions
//! used throughout the crate.
//!
//! Inverse Wishart distributions use the block-closed convention in which
//! `IW_q(d, Ψ)` has mean `Ψ / (d - 2)` for every dimension `q`, so that the
//! diagonal blocks of an `IW_{2q}(d, Ψ)` draw are `IW_q(d, Ψ_11)` with the
//! same `d`. The standard (Anderson) degrees of freedom are `d + q - 1`.
//! Wishart distributions use the standard convention with mean `dof * scale`.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative pivot tolerance used by [`cholesky_pd`] when callers have no
/// better choice.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

/// Absolute tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// A square symmetric matrix. Symmetry is enforced exactly on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Mat);

impl SymMatrix {
    /// Accepts `m` if it is square and symmetric to within [`SYMMETRY_TOL`].
    pub fn new(m: Mat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare);
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be at least 1"));
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Replaces `m` by `(m + m') / 2`. `m` must be square.
    pub fn symmetrize(m: Mat) -> Self {
        assert!(m.is_square(), "symmetrize requires a square matrix");
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn from_row_slice(q: usize, data: &[f64]) -> Result<Self> {
        Self::new(Mat::from_row_slice(q, q, data))
    }

    pub fn identity(q: usize) -> Self {
        SymMatrix(Mat::identity(q, q))
    }

    pub fn zeros(q: usize) -> Self {
        SymMatrix(Mat::zeros(q, q))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(Mat::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn cholesky(&self, tol: f64) -> Result<CholeskyFactor> {
        cholesky_pd(self, tol)
    }

    pub fn is_pd(&self, tol: f64) -> bool {
        is_pd(self, tol)
    }

    /// `A X A'` for any conformable `A`.
    pub fn congruence(&self, a: &Mat) -> SymMatrix {
        SymMatrix::symmetrize(a * &self.0 * a.transpose())
    }

    /// Inverse via the Cholesky factor.
    pub fn inverse(&self) -> Result<SymMatrix> {
        Ok(self.cholesky(DEFAULT_PD_TOL)?.inverse())
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        max_abs(&(&self.0 - &other.0))
    }
}

impl core::ops::Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl core::ops::Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl core::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Lower-triangular Cholesky factor `L` of a positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: Mat,
}

impl CholeskyFactor {
    pub fn l(&self) -> &Mat {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log |L L'|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L^{-1} B`.
    pub fn solve_lower(&self, b: &Mat) -> Mat {
        self.l
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L'^{-1} B`.
    pub fn solve_upper(&self, b: &Mat) -> Mat {
        self.l
            .tr_solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `(L L')^{-1} B`.
    pub fn solve(&self, b: &Mat) -> Mat {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        let y = self.l.solve_lower_triangular(b).expect("positive diagonal");
        self.l.tr_solve_lower_triangular(&y).expect("positive diagonal")
    }

    /// `b' (L L')^{-1} b`.
    pub fn quad_form(&self, b: &Vector) -> f64 {
        let y = self.l.solve_lower_triangular(b).expect("positive diagonal");
        y.norm_squared()
    }

    /// `tr((L L')^{-1} M)`.
    pub fn trace_solve(&self, m: &Mat) -> f64 {
        self.solve(m).trace()
    }

    pub fn inverse(&self) -> SymMatrix {
        let q = self.dim();
        SymMatrix::symmetrize(self.solve(&Mat::identity(q, q)))
    }

    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::symmetrize(&self.l * self.l.transpose())
    }
}

/// Cholesky factorization with an explicit pivot tolerance.
///
/// A pivot (the diagonal value before the square root) at or below
/// `tol * max_i A_ii` is rejected with [`Error::NotPositiveDefinite`].
pub fn cholesky_pd(a: &SymMatrix, tol: f64) -> Result<CholeskyFactor> {
    let m = a.as_mat();
    let q = m.nrows();
    let max_diag = (0..q).map(|i| m[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if !max_diag.is_finite() || max_diag <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let threshold = tol * max_diag;
    let mut l = Mat::zeros(q, q);
    for j in 0..q {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..q {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(CholeskyFactor { l })
}

pub fn is_pd(a: &SymMatrix, tol: f64) -> bool {
    cholesky_pd(a, tol).is_ok()
}

/// `log Γ_q(a)`, the multivariate log-gamma function.
pub fn ln_mvgamma(q: usize, a: f64) -> f64 {
    let qf = q as f64;
    qf * (qf - 1.0) / 4.0 * LN_PI
        + (1..=q)
            .map(|j| libm::lgamma(a + (1.0 - j as f64) / 2.0))
            .sum::<f64>()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    // column-major fill keeps the draw order fixed for a given seed
    Mat::from_fn(rows, cols, |_, _| standard_normal(rng))
}

fn chi_squared<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    Gamma::new(k / 2.0, 2.0)
        .expect("positive chi-squared degrees of freedom")
        .sample(rng)
}

/// Lower-triangular Bartlett factor for a standard Wishart with `dof`
/// degrees of freedom in dimension `q`. Real-valued `dof > q - 1` is allowed.
fn bartlett_factor<R: Rng + ?Sized>(q: usize, dof: f64, rng: &mut R) -> Mat {
    let mut a = Mat::zeros(q, q);
    for i in 0..q {
        a[(i, i)] = chi_squared(dof - i as f64, rng).sqrt();
        for j in 0..i {
            a[(i, j)] = standard_normal(rng);
        }
    }
    a
}

/// Inverse Wishart parameters in the block-closed convention.
#[derive(Debug, Clone, PartialEq)]
pub struct IWParams {
    dof: f64,
    scale: SymMatrix,
    chol: CholeskyFactor,
}

impl IWParams {
    pub fn new(dof: f64, scale: SymMatrix) -> Result<Self> {
        if !(dof > 2.0) || !dof.is_finite() {
            return Err(Error::InvalidDof { dof, min: 2.0 });
        }
        let chol = scale.cholesky(DEFAULT_PD_TOL)?;
        Ok(IWParams { dof, scale, chol })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn scale(&self) -> &SymMatrix {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    /// Degrees of freedom in the standard parameterization, `dof + q - 1`.
    pub fn chol(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn standard_dof(&self) -> f64 {
        self.dof + self.dim() as f64 - 1.0
    }

    pub fn mean(&self) -> SymMatrix {
        self.scale.scaled(1.0 / (self.dof - 2.0))
    }

    pub fn mode(&self) -> SymMatrix {
        self.scale.scaled(1.0 / (self.dof + 2.0 * self.dim() as f64))
    }

    /// Draws `W^{-1}` for `W ~ Wishart(dof + q - 1, scale^{-1})` through the
    /// Bartlett factor and triangular solves only.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SymMatrix> {
        let q = self.dim();
        let a = bartlett_factor(q, self.standard_dof(), rng);
        // B = A^{-1} C' so that X = B' B = C (A A')^{-1} C'
        let b = a
            .solve_lower_triangular(&self.chol.l().transpose())
            .ok_or(Error::NotPositiveDefinite)?;
        let x = SymMatrix::symmetrize(b.transpose() * b);
        if !x.is_pd(DEFAULT_PD_TOL) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(x)
    }

    pub fn ln_pdf(&self, x: &SymMatrix) -> Result<f64> {
        let xc = x.cholesky(DEFAULT_PD_TOL)?;
        Ok(self.ln_pdf_factored(&xc))
    }

    /// Log density given a precomputed Cholesky factor of the argument.
    pub fn ln_pdf_factored(&self, xc: &CholeskyFactor) -> f64 {
        let q = self.dim();
        let qf = q as f64;
        let nu = self.standard_dof();
        // tr(Ψ X^{-1}) = || L_X^{-1} C_Ψ ||_F^2
        let tr = xc.solve_lower(self.chol.l()).norm_squared();
        0.5 * nu * self.chol.log_det() - 0.5 * nu * qf * LN_2 - ln_mvgamma(q, 0.5 * nu)
            - 0.5 * (nu + qf + 1.0) * xc.log_det()
            - 0.5 * tr
    }
}

pub fn iw_sample<R: Rng + ?Sized>(p: &IWParams, rng: &mut R) -> Result<SymMatrix> {
    p.sample(rng)
}

pub fn iw_logpdf(x: &SymMatrix, p: &IWParams) -> Result<f64> {
    p.ln_pdf(x)
}

/// Standard Wishart distribution, mean `dof * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wishart {
    dof: f64,
    scale: SymMatrix,
    chol: CholeskyFactor,
}

impl Wishart {
    pub fn new(dof: f64, scale: SymMatrix) -> Result<Self> {
        let min = scale.dim() as f64 - 1.0;
        if !(dof > min) || !dof.is_finite() {
            return Err(Error::InvalidDof { dof, min });
        }
        let chol = scale.cholesky(DEFAULT_PD_TOL)?;
        Ok(Wishart { dof, scale, chol })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn scale(&self) -> &SymMatrix {
        &self.scale
    }

    pub fn mean(&self) -> SymMatrix {
        self.scale.scaled(self.dof)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        let a = bartlett_factor(self.scale.dim(), self.dof, rng);
        let ca = self.chol.l() * a;
        SymMatrix::symmetrize(&ca * ca.transpose())
    }

    pub fn ln_pdf(&self, x: &SymMatrix) -> Result<f64> {
        let q = self.scale.dim();
        let qf = q as f64;
        let xc = x.cholesky(DEFAULT_PD_TOL)?;
        // tr(Ψ^{-1} X) = || C^{-1} L_X ||_F^2
        let tr = self.chol.solve_lower(xc.l()).norm_squared();
        Ok(0.5 * (self.dof - qf - 1.0) * xc.log_det()
            - 0.5 * tr
            - 0.5 * self.dof * qf * LN_2
            - 0.5 * self.dof * self.chol.log_det()
            - ln_mvgamma(q, 0.5 * self.dof))
    }
}

pub fn wishart_sample<R: Rng + ?Sized>(dof: f64, scale: &SymMatrix, rng: &mut R) -> Result<SymMatrix> {
    Ok(Wishart::new(dof, scale.clone())?.sample(rng))
}

pub fn wishart_logpdf(x: &SymMatrix, dof: f64, scale: &SymMatrix) -> Result<f64> {
    Wishart::new(dof, scale.clone())?.ln_pdf(x)
}

/// Matrix normal `N(M, U, C)` with `Cov(X_ik, X_jl) = U_ij C_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatNormParams {
    mean: Mat,
    row_cov: SymMatrix,
    col_cov: SymMatrix,
    row_chol: CholeskyFactor,
    col_chol: CholeskyFactor,
}

impl MatNormParams {
    pub fn new(mean: Mat, row_cov: SymMatrix, col_cov: SymMatrix) -> Result<Self> {
        if mean.nrows() != row_cov.dim() {
            return Err(Error::DimensionMismatch { expected: row_cov.dim(), found: mean.nrows() });
        }
        if mean.ncols() != col_cov.dim() {
            return Err(Error::DimensionMismatch { expected: col_cov.dim(), found: mean.ncols() });
        }
        let row_chol = row_cov.cholesky(DEFAULT_PD_TOL)?;
        let col_chol = col_cov.cholesky(DEFAULT_PD_TOL)?;
        Ok(MatNormParams { mean, row_cov, col_cov, row_chol, col_chol })
    }

    /// Same law, with the column covariance given through its inverse.
    pub fn with_col_precision(mean: Mat, row_cov: SymMatrix, col_precision: &SymMatrix) -> Result<Self> {
        let col_cov = col_precision.cholesky(DEFAULT_PD_TOL)?.inverse();
        Self::new(mean, row_cov, col_cov)
    }

    pub fn mean(&self) -> &Mat {
        &self.mean
    }

    pub fn row_cov(&self) -> &SymMatrix {
        &self.row_cov
    }

    pub fn col_cov(&self) -> &SymMatrix {
        &self.col_cov
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        matnorm_sample_factored(&self.mean, &self.row_chol, &self.col_chol, rng)
    }

    pub fn ln_pdf(&self, x: &Mat) -> Result<f64> {
        if x.shape() != self.mean.shape() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), found: x.len() });
        }
        Ok(matnorm_logpdf_factored(x, &self.mean, &self.row_chol, &self.col_chol))
    }
}

/// Matrix normal draw from precomputed row and column covariance factors.
pub fn matnorm_sample_factored<R: Rng + ?Sized>(
    mean: &Mat,
    row: &CholeskyFactor,
    col: &CholeskyFactor,
    rng: &mut R,
) -> Mat {
    let z = normal_matrix(mean.nrows(), mean.ncols(), rng);
    mean + row.l() * z * col.l().transpose()
}

pub fn matnorm_logpdf_factored(x: &Mat, mean: &Mat, row: &CholeskyFactor, col: &CholeskyFactor) -> f64 {
    let (q, p) = mean.shape();
    let y1 = row.solve_lower(&(x - mean));
    let y = col.solve_lower(&y1.transpose());
    let (qf, pf) = (q as f64, p as f64);
    -0.5 * qf * pf * (2.0 * PI).ln() - 0.5 * pf * row.log_det() - 0.5 * qf * col.log_det() - 0.5 * y.norm_squared()
}

pub fn matnorm_sample<R: Rng + ?Sized>(p: &MatNormParams, rng: &mut R) -> Mat {
    p.sample(rng)
}

pub fn matnorm_logpdf(x: &Mat, p: &MatNormParams) -> Result<f64> {
    p.ln_pdf(x)
}

/// Multivariate normal log density with covariance given by its factor.
pub fn mvn_logpdf_factored(x: &Vector, mean: &Vector, cov: &CholeskyFactor) -> f64 {
    let d = x - mean;
    let q = x.len() as f64;
    -0.5 * q * (2.0 * PI).ln() - 0.5 * cov.log_det() - 0.5 * cov.quad_form(&d)
}

pub fn mvn_logpdf(x: &Vector, mean: &Vector, cov: &SymMatrix) -> Result<f64> {
    Ok(mvn_logpdf_factored(x, mean, &cov.cholesky(DEFAULT_PD_TOL)?))
}

pub fn mvn_sample<R: Rng + ?Sized>(mean: &Vector, cov: &CholeskyFactor, rng: &mut R) -> Vector {
    let z = Vector::from_fn(mean.len(), |_, _| standard_normal(rng));
    mean + cov.l() * z
}

/// Log density of the multivariate t with `nu` degrees of freedom,
/// location `mu` and scale matrix `scale`:
///
/// `a_{q,nu} |scale|^{-1/2} (1 + (x-mu)' scale^{-1} (x-mu) / nu)^{-(nu+q)/2}`
/// with `a_{q,nu} = Γ((nu+q)/2) / (Γ(nu/2) nu^{q/2} π^{q/2})`.
pub fn mvt_logpdf(x: &Vector, nu: f64, mu: &Vector, scale: &SymMatrix) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidDof { dof: nu, min: 0.0 });
    }
    let c = scale.cholesky(DEFAULT_PD_TOL)?;
    Ok(mvt_logpdf_factored(x, nu, mu, &c))
}

pub fn mvt_logpdf_factored(x: &Vector, nu: f64, mu: &Vector, scale: &CholeskyFactor) -> f64 {
    let q = x.len() as f64;
    let delta = scale.quad_form(&(x - mu));
    mvt_log_norm_const(q as usize, nu) - 0.5 * scale.log_det() - 0.5 * (nu + q) * (delta / nu).ln_1p()
}

/// `log a_{q,nu}`.
pub fn mvt_log_norm_const(q: usize, nu: f64) -> f64 {
    let qf = q as f64;
    ln_gamma(0.5 * (nu + qf)) - ln_gamma(0.5 * nu) - 0.5 * qf * (nu.ln() + LN_PI)
}

/// Beta distribution on `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    a: f64,
    b: f64,
}

impl Beta {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidShape("beta shapes must be positive and finite"));
        }
        Ok(Beta { a, b })
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Beta::new(self.a, self.b)
            .expect("validated shapes")
            .sample(rng)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return f64::NEG_INFINITY;
        }
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() + ln_gamma(self.a + self.b)
            - ln_gamma(self.a)
            - ln_gamma(self.b)
    }
}

/// Inverse gamma with density `b^a / Γ(a) x^{-a-1} exp(-b / x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    shape: f64,
    scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0) || !shape.is_finite() || !scale.is_finite() {
            return Err(Error::InvalidShape("inverse gamma parameters must be positive and finite"));
        }
        Ok(InverseGamma { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = Gamma::new(self.shape, 1.0 / self.scale)
            .expect("validated parameters")
            .sample(rng);
        1.0 / g
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln() - self.scale / x
    }
}

/// The scalar distributions used for priors and proposals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarDist {
    Beta(Beta),
    InverseGamma(InverseGamma),
}

impl ScalarDist {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Beta::new(a, b).map(ScalarDist::Beta)
    }

    pub fn inverse_gamma(shape: f64, scale: f64) -> Result<Self> {
        InverseGamma::new(shape, scale).map(ScalarDist::InverseGamma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDist::Beta(d) => d.sample(rng),
            ScalarDist::InverseGamma(d) => d.sample(rng),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            ScalarDist::Beta(d) => d.ln_pdf(x),
            ScalarDist::InverseGamma(d) => d.ln_pdf(x),
        }
    }
}

/// Upper-triangle entries `(i, j, value)` with `i <= j`, row-major.
pub fn upper_triangle(m: &SymMatrix) -> Vec<(usize, usize, f64)> {
    let q = m.dim();
    let mut out = Vec::with_capacity(q * (q + 1) / 2);
    for i in 0..q {
        for j in i..q {
            out.push((i, j, m[(i, j)]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky_pd(&SymMatrix::identity(2), DEFAULT_PD_TOL).unwrap();
        assert_eq!(l.l(), &Mat::identity(2, 2));
        let a = SymMatrix::from_row_slice(2, &[4.0, 0.0, 0.0, 9.0]).unwrap();
        let l = cholesky_pd(&a, DEFAULT_PD_TOL).unwrap();
        assert_eq!(l.l(), &Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn cholesky_rejects_indefinite_and_zero() {
        let a = SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(cholesky_pd(&a, DEFAULT_PD_TOL), Err(Error::NotPositiveDefinite));
        assert!(!is_pd(&SymMatrix::zeros(3), DEFAULT_PD_TOL));
        assert!(is_pd(&SymMatrix::identity(3), DEFAULT_PD_TOL));
    }

    #[test]
    fn symmetric_construction_checks() {
        assert_eq!(
            SymMatrix::new(Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])),
            Err(Error::NotSymmetric)
        );
        assert_eq!(SymMatrix::new(Mat::zeros(2, 3)), Err(Error::NotSquare));
    }

    #[test]
    fn iw_rejects_degenerate_scale_and_low_dof() {
        assert_eq!(IWParams::new(5.0, SymMatrix::zeros(2)).err(), Some(Error::NotPositiveDefinite));
        assert!(matches!(IWParams::new(2.0, SymMatrix::identity(2)), Err(Error::InvalidDof { .. })));
    }

    #[test]
    fn scalar_iw_is_inverse_gamma() {
        // IW_1(n+2, ns) = IG((n+2)/2, ns/2); n = 2, s = 1
        let p = IWParams::new(4.0, SymMatrix::from_diagonal(&[2.0])).unwrap();
        let ig = InverseGamma::new(2.0, 1.0).unwrap();
        for &x in &[0.1, 0.5, 1.0, 2.7, 10.0] {
            let lp = p.ln_pdf(&SymMatrix::from_diagonal(&[x])).unwrap();
            assert!((lp - ig.ln_pdf(x)).abs() < 1e-12, "{lp} vs {}", ig.ln_pdf(x));
        }
    }

    #[test]
    fn scalar_wishart_is_gamma() {
        // W_1(v, s) = Gamma(v/2, scale 2s)
        let (v, s) = (5.0, 0.7);
        let w = Wishart::new(v, SymMatrix::from_diagonal(&[s])).unwrap();
        for &x in &[0.2, 1.0, 3.5] {
            let k = v / 2.0;
            let theta = 2.0 * s;
            let expected = (k - 1.0) * f64::ln(x) - x / theta - ln_gamma(k) - k * f64::ln(theta);
            let got = w.ln_pdf(&SymMatrix::from_diagonal(&[x])).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn wishart_dof_boundary() {
        assert!(matches!(Wishart::new(1.0, SymMatrix::identity(2)), Err(Error::InvalidDof { .. })));
    }

    #[test]
    fn beta_shape_boundary() {
        assert!(matches!(Beta::new(0.0, 1.0), Err(Error::InvalidShape(_))));
        assert!(matches!(ScalarDist::beta(0.0, 1.0), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn matnorm_logpdf_at_mean_is_normalizer() {
        let u = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let c = SymMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, 3.0]).unwrap();
        let m = Mat::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.5]);
        let p = MatNormParams::new(m.clone(), u.clone(), c.clone()).unwrap();
        let expected = -2.0 * f64::ln(2.0 * PI) - f64::ln(3.0) - f64::ln(3.0);
        assert!((p.ln_pdf(&m).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn logpdfs_agree_with_direct_inverse() {
        let mut r = rng(11);
        let scale = SymMatrix::from_row_slice(3, &[2.0, 0.4, 0.1, 0.4, 1.5, -0.3, 0.1, -0.3, 1.0]).unwrap();
        let iw = IWParams::new(7.5, scale.clone()).unwrap();
        let w = Wishart::new(6.5, scale.clone()).unwrap();
        for _ in 0..5 {
            let x = iw.sample(&mut r).unwrap();
            let xi = x.as_mat().clone().try_inverse().unwrap();
            let q = 3.0;
            let nu = 7.5 + q - 1.0;
            let direct = 0.5 * nu * scale.as_mat().determinant().ln() - 0.5 * nu * q * LN_2
                - ln_mvgamma(3, nu / 2.0)
                - 0.5 * (nu + q + 1.0) * x.as_mat().determinant().ln()
                - 0.5 * (scale.as_mat() * &xi).trace();
            assert!((iw.ln_pdf(&x).unwrap() - direct).abs() < 1e-8);

            let si = scale.as_mat().clone().try_inverse().unwrap();
            let direct_w = 0.5 * (6.5 - q - 1.0) * x.as_mat().determinant().ln()
                - 0.5 * (&si * x.as_mat()).trace()
                - 0.5 * 6.5 * q * LN_2
                - 0.5 * 6.5 * scale.as_mat().determinant().ln()
                - ln_mvgamma(3, 6.5 / 2.0);
            assert!((w.ln_pdf(&x).unwrap() - direct_w).abs() < 1e-8);

            let mean = Mat::from_fn(3, 2, |i, j| (i as f64) - 0.5 * j as f64);
            let col = SymMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 0.5]).unwrap();
            let mn = MatNormParams::new(mean.clone(), x.clone(), col.clone()).unwrap();
            let y = mn.sample(&mut r);
            let d = &y - &mean;
            let ci = col.as_mat().clone().try_inverse().unwrap();
            let direct_mn = -3.0 * f64::ln(2.0 * PI)
                - 1.0 * x.as_mat().determinant().ln()
                - 1.5 * col.as_mat().determinant().ln()
                - 0.5 * (ci * d.transpose() * &xi * d).trace();
            assert!((mn.ln_pdf(&y).unwrap() - direct_mn).abs() < 1e-8);

            let v = Vector::from_column_slice(&[0.3, -1.0, 2.0]);
            let mu = Vector::from_column_slice(&[0.0, 0.5, 1.0]);
            let dv = &v - &mu;
            let delta = (dv.transpose() * &xi * &dv)[(0, 0)];
            let direct_t = mvt_log_norm_const(3, 4.0) - 0.5 * x.as_mat().determinant().ln()
                - 3.5 * (1.0 + delta / 4.0).ln();
            assert!((mvt_logpdf(&v, 4.0, &mu, &x).unwrap() - direct_t).abs() < 1e-8);
        }
    }

    #[test]
    fn mvt_density_at_location() {
        let scale = SymMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let mu = Vector::from_column_slice(&[1.0, -1.0]);
        let got = mvt_logpdf(&mu, 5.0, &mu, &scale).unwrap();
        let a = ln_gamma(3.5) - ln_gamma(2.5) - f64::ln(5.0) - f64::ln(PI);
        assert!((got - (a - 0.5 * scale.as_mat().determinant().ln())).abs() < 1e-12);
    }

    #[test]
    fn mvt_large_dof_approaches_normal() {
        let one = Vector::from_column_slice(&[1.0]);
        let zero = Vector::from_column_slice(&[0.0]);
        let t = mvt_logpdf(&one, 1e6, &zero, &SymMatrix::identity(1)).unwrap();
        let n = mvn_logpdf(&one, &zero, &SymMatrix::identity(1)).unwrap();
        assert!((t - n).abs() < 1e-3);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = SymMatrix::from_row_slice(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]).unwrap();
        let c = a.cholesky(DEFAULT_PD_TOL).unwrap();
        assert!(c.reconstruct().max_abs_diff(&a) < 1e-12);
        for d in c.l().diagonal().iter() {
            assert!(*d > 0.0);
        }
    }
}
