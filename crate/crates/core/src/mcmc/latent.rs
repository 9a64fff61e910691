//! Imputation of the latent covariates `z_t`.

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::error::Result;
use crate::matcore::{normal_matrix, CholeskyFactor, Mat, SymMatrix, Vector, DEFAULT_PD_TOL};

/// Gaussian full conditional of `z_t`: precision
/// `P = Σ_{t-1}^{-1} + Υ' Ψ^{-1} Υ` and mean `P^{-1} Υ' Ψ^{-1} x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZConditional {
    pub mean: Vector,
    precision_chol: CholeskyFactor,
}

impl ZConditional {
    pub fn new(x: &Vector, ups: &Mat, psi: &SymMatrix, sigma_prev: &SymMatrix) -> Result<Self> {
        let psi_chol = psi.cholesky(DEFAULT_PD_TOL)?;
        let a = psi_chol.solve_lower(ups);
        let prec = &sigma_prev.cholesky(DEFAULT_PD_TOL)?.inverse() + &SymMatrix::symmetrize(a.transpose() * &a);
        let precision_chol = prec.cholesky(DEFAULT_PD_TOL)?;
        let rhs = ups.transpose() * psi_chol.solve_vec(x);
        let mean = precision_chol.solve_vec(&rhs);
        Ok(ZConditional { mean, precision_chol })
    }

    pub fn cov(&self) -> SymMatrix {
        self.precision_chol.inverse()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let e = normal_matrix(self.mean.len(), 1, rng);
        &self.mean + self.precision_chol.solve_upper(&e).column(0)
    }
}

/// One draw of `z_t` given `x_t`, the forward pair `(Υ_t, Ψ_t)` and `Σ_{t-1}`.
pub fn sample_z<R: Rng + ?Sized>(
    x: &Vector,
    ups: &Mat,
    psi: &SymMatrix,
    sigma_prev: &SymMatrix,
    rng: &mut R,
) -> Result<Vector> {
    Ok(ZConditional::new(x, ups, psi, sigma_prev)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_regression_returns_prior() {
        let sigma = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let c = ZConditional::new(
            &Vector::from_column_slice(&[3.0, -1.0]),
            &Mat::zeros(2, 2),
            &SymMatrix::identity(2),
            &sigma,
        )
        .unwrap();
        assert!(c.mean.amax() < 1e-15);
        assert!(c.cov().max_abs_diff(&sigma) < 1e-12);
    }

    #[test]
    fn scalar_substitution() {
        let one = SymMatrix::identity(1);
        let c = ZConditional::new(&Vector::from_column_slice(&[2.0]), &Mat::identity(1, 1), &one, &one).unwrap();
        assert!((c.mean[0] - 1.0).abs() < 1e-15);
        assert!((c.cov()[(0, 0)] - 0.5).abs() < 1e-15);
    }
}
