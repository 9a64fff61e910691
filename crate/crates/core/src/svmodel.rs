//! Vector autoregressions whose innovations carry IW-AR(1) volatility:
//! `ξ_t = Σ_i A_i ξ_{t-i} + x_t`, `x_t ~ N(0, Σ_t)`, with diagonal
//! `A_i = diag(a_i)`.
//!
//! Series are slices `ξ_{1-r:T}`: the first `r` entries are the presample,
//! which is conditioned on and never modeled.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::iwar::VarPath;
use crate::matcore::{normal_matrix, CholeskyFactor, Mat, SymMatrix, Vector, DEFAULT_PD_TOL};

/// Diagonal VAR(r) coefficients; row `i` of `a` holds `diag(A_{i+1})`.
///
/// The stacked vector `(a_1', ..., a_r')'` puts `A_{i+1}[j, j]` at
/// index `i * q + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarCoeffs {
    a: Mat,
}

impl VarCoeffs {
    pub fn new(a: Mat) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("coefficients must be finite"));
        }
        Ok(VarCoeffs { a })
    }

    pub fn zeros(r: usize, q: usize) -> Self {
        VarCoeffs { a: Mat::zeros(r, q) }
    }

    pub fn from_stacked(r: usize, q: usize, v: &Vector) -> Result<Self> {
        if v.len() != r * q {
            return Err(Error::DimensionMismatch { expected: r * q, found: v.len() });
        }
        Self::new(Mat::from_fn(r, q, |i, j| v[i * q + j]))
    }

    pub fn lags(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn stacked(&self) -> Vector {
        let (r, q) = self.a.shape();
        Vector::from_fn(r * q, |k, _| self.a[(k / q, k % q)])
    }

    /// `Σ_i A_i ξ_{t-i}` where `lagged[i]` is `ξ_{t-1-i}`.
    fn predict(&self, lagged: impl Iterator<Item = Vector>) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (i, xi) in lagged.enumerate() {
            for j in 0..self.dim() {
                out[j] += self.a[(i, j)] * xi[j];
            }
        }
        out
    }
}

/// Gaussian prior `N(mean, cov)` on the stacked coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPrior {
    mean: Vector,
    cov: SymMatrix,
    cov_chol: CholeskyFactor,
}

impl CoeffPrior {
    pub fn new(mean: Vector, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: cov.dim(), found: mean.len() });
        }
        let cov_chol = cov.cholesky(DEFAULT_PD_TOL)?;
        Ok(CoeffPrior { mean, cov, cov_chol })
    }

    /// `N(0, variance * I)` over `r * q` coefficients.
    pub fn isotropic(r: usize, q: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::InvalidParameter("prior variance must be positive"));
        }
        let k = r * q;
        Self::new(Vector::zeros(k), SymMatrix::from_diagonal(&alloc::vec![variance; k]))
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }
}

fn check_series(xi: &[Vector], r: usize, q: usize) -> Result<usize> {
    if xi.len() < r {
        return Err(Error::DimensionMismatch { expected: r, found: xi.len() });
    }
    for v in xi {
        if v.len() != q {
            return Err(Error::DimensionMismatch { expected: q, found: v.len() });
        }
    }
    Ok(xi.len() - r)
}

/// `x_t = ξ_t - Σ_i A_i ξ_{t-i}` for `t = 1..T`.
pub fn residuals(xi: &[Vector], coeffs: &VarCoeffs) -> Result<Vec<Vector>> {
    let r = coeffs.lags();
    let horizon = check_series(xi, r, coeffs.dim())?;
    Ok((0..horizon)
        .map(|t| {
            let k = t + r;
            &xi[k] - coeffs.predict((1..=r).map(|l| xi[k - l].clone()))
        })
        .collect())
}

/// Inverse of [`residuals`]: rebuilds `ξ_{1-r:T}` from the presample and
/// the innovations `x_{1:T}`.
pub fn apply_coeffs(presample: &[Vector], x: &[Vector], coeffs: &VarCoeffs) -> Result<Vec<Vector>> {
    let r = coeffs.lags();
    let q = coeffs.dim();
    if presample.len() != r {
        return Err(Error::DimensionMismatch { expected: r, found: presample.len() });
    }
    check_series(x, 0, q)?;
    check_series(presample, 0, q)?;
    let mut xi: Vec<Vector> = presample.to_vec();
    for xt in x {
        let k = xi.len();
        let pred = coeffs.predict((1..=r).map(|l| xi[k - l].clone()));
        xi.push(pred + xt);
    }
    Ok(xi)
}

/// The Gaussian full conditional of the stacked coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffConditional {
    pub mean: Vector,
    pub precision: SymMatrix,
    precision_chol: CholeskyFactor,
}

impl CoeffConditional {
    pub fn cov(&self) -> SymMatrix {
        self.precision_chol.inverse()
    }

    /// `mean + L'^{-1} e` with `L L'` the precision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let e = normal_matrix(self.mean.len(), 1, rng);
        let d = self.precision_chol.solve_upper(&e);
        &self.mean + d.column(0)
    }
}

/// Posterior of `(a_1', ..., a_r')'` given `ξ_{1-r:T}` and `Σ_{1:T}`:
/// precision `Σ_a^{-1} + Σ_t D_t' Σ_t^{-1} D_t` and mean solving
/// `P m = Σ_a^{-1} μ_a + Σ_t D_t' Σ_t^{-1} ξ_t`, with
/// `D_t = [diag(ξ_{t-1}) ... diag(ξ_{t-r})]`.
pub fn coeff_conditional(xi: &[Vector], path: &VarPath, prior: &CoeffPrior) -> Result<CoeffConditional> {
    let k = prior.mean.len();
    let q = path.dim();
    if q == 0 || k % q != 0 {
        return Err(Error::DimensionMismatch { expected: q, found: k });
    }
    let r = k / q;
    let horizon = check_series(xi, r, q)?;
    if path.horizon() != horizon {
        return Err(Error::DimensionMismatch { expected: horizon, found: path.horizon() });
    }
    let prior_prec = prior.cov_chol.inverse();
    let mut prec = prior_prec.as_mat().clone();
    let mut rhs = prior.cov_chol.solve_vec(&prior.mean);
    for t in 1..=horizon {
        let idx = t - 1 + r;
        let sinv = path.get(t).cholesky(DEFAULT_PD_TOL)?.inverse();
        let w = sinv.as_mat() * &xi[idx];
        for i in 0..r {
            let li = &xi[idx - 1 - i];
            for j in 0..q {
                let row = i * q + j;
                rhs[row] += li[j] * w[j];
                for m in 0..r {
                    let lm = &xi[idx - 1 - m];
                    for l in 0..q {
                        prec[(row, m * q + l)] += li[j] * sinv[(j, l)] * lm[l];
                    }
                }
            }
        }
    }
    let precision = SymMatrix::symmetrize(prec);
    let precision_chol = precision.cholesky(DEFAULT_PD_TOL)?;
    let mean = precision_chol.solve_vec(&rhs);
    Ok(CoeffConditional { mean, precision, precision_chol })
}

/// One draw of the coefficients from [`coeff_conditional`].
pub fn sample_a<R: Rng + ?Sized>(
    xi: &[Vector],
    path: &VarPath,
    prior: &CoeffPrior,
    rng: &mut R,
) -> Result<VarCoeffs> {
    let cond = coeff_conditional(xi, path, prior)?;
    let q = path.dim();
    VarCoeffs::from_stacked(prior.mean.len() / q, q, &cond.sample(rng))
}

/// Standardized series under the lower Cholesky square root
/// `Σ_t = L_t L_t'`: `nu[t-1] = L_t^{-1} ξ_t` and `w[t-1] = L_t^{-1} x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub nu: Vec<Vector>,
    pub w: Vec<Vector>,
}

pub fn standardize(xi: &[Vector], path: &VarPath, coeffs: &VarCoeffs) -> Result<Standardized> {
    let r = coeffs.lags();
    let x = residuals(xi, coeffs)?;
    if path.horizon() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: path.horizon() });
    }
    let mut nu = Vec::with_capacity(x.len());
    let mut w = Vec::with_capacity(x.len());
    for (t, xt) in x.iter().enumerate() {
        let c = path.get(t + 1).cholesky(DEFAULT_PD_TOL)?;
        let lower = |v: &Vector| c.l().solve_lower_triangular(v).expect("positive diagonal");
        nu.push(lower(&xi[t + r]));
        w.push(lower(xt));
    }
    Ok(Standardized { nu, w })
}
