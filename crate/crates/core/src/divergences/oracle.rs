//! Dense full-covariance reference forms.
//!
//! These evaluate the general closed forms literally, with matrix inverses,
//! determinants and an eigendecomposition-based matrix square root. They are
//! slow and meant for small `d`; the spherical kernels in the parent module
//! are checked against them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest dimension the oracles accept.
pub const MAX_ORACLE_DIM: usize = 8;

fn check_inputs(mean: &[f64], cov: &DMatrix<f64>) -> Result<()> {
    let d = mean.len();
    if d == 0 || d > MAX_ORACLE_DIM {
        return Err(Error::InvalidGaussian(format!(
            "oracle dimension must be in 1..={MAX_ORACLE_DIM}, got {d}"
        )));
    }
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: cov.nrows(),
        });
    }
    Ok(())
}

fn spd_eigen(cov: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = (cov + cov.transpose()) * 0.5;
    if (&sym - cov).amax() > 1e-12 * cov.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(eig)
}

fn inverse(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(cov)?;
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

fn sqrtm(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(cov)?;
    let root = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

fn log_det(cov: &DMatrix<f64>) -> Result<f64> {
    Ok(spd_eigen(cov)?.eigenvalues.iter().map(|l| l.ln()).sum())
}

/// `D_KL[N(mean0, cov0) ‖ N(mean1, cov1)]`.
pub fn oracle_kl_full(
    mean0: &[f64],
    cov0: &DMatrix<f64>,
    mean1: &[f64],
    cov1: &DMatrix<f64>,
) -> Result<f64> {
    check_inputs(mean0, cov0)?;
    check_inputs(mean1, cov1)?;
    if mean0.len() != mean1.len() {
        return Err(Error::DimensionMismatch {
            expected: mean0.len(),
            actual: mean1.len(),
        });
    }
    let d = mean0.len() as f64;
    let inv1 = inverse(cov1)?;
    let delta = DVector::from_column_slice(mean0) - DVector::from_column_slice(mean1);
    let quad = (delta.transpose() * &inv1 * &delta)[(0, 0)];
    let trace = (&inv1 * cov0).trace();
    Ok(0.5 * (log_det(cov1)? - log_det(cov0)?) - 0.5 * d + 0.5 * (quad + trace))
}

/// Squared 2-Wasserstein distance,
/// `‖Δ‖² + tr(Σ0 + Σ1 − 2 (Σ0^½ Σ1 Σ0^½)^½)`.
pub fn oracle_w2_full(
    mean0: &[f64],
    cov0: &DMatrix<f64>,
    mean1: &[f64],
    cov1: &DMatrix<f64>,
) -> Result<f64> {
    check_inputs(mean0, cov0)?;
    check_inputs(mean1, cov1)?;
    if mean0.len() != mean1.len() {
        return Err(Error::DimensionMismatch {
            expected: mean0.len(),
            actual: mean1.len(),
        });
    }
    let delta = DVector::from_column_slice(mean0) - DVector::from_column_slice(mean1);
    let root0 = sqrtm(cov0)?;
    let inner = &root0 * cov1 * &root0;
    let cross = sqrtm(&inner)?;
    Ok(delta.norm_squared() + (cov0 + cov1 - cross * 2.0).trace())
}

/// `sqrt(Δᵀ Σ⁻¹ Δ)` for a given (joint) covariance.
pub fn oracle_mahalanobis_full(mean0: &[f64], mean1: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    check_inputs(mean0, cov)?;
    if mean0.len() != mean1.len() {
        return Err(Error::DimensionMismatch {
            expected: mean0.len(),
            actual: mean1.len(),
        });
    }
    let delta = DVector::from_column_slice(mean0) - DVector::from_column_slice(mean1);
    let quad = (delta.transpose() * inverse(cov)? * &delta)[(0, 0)];
    Ok(quad.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn univariate_kl() {
        let v = oracle_kl_full(&[0.0], &diag(&[1.0]), &[1.0], &diag(&[1.0])).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_inputs_give_zero() {
        let mean = [0.5, -1.0, 2.0];
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
        assert!(oracle_kl_full(&mean, &cov, &mean, &cov).unwrap().abs() < 1e-12);
        assert!(oracle_w2_full(&mean, &cov, &mean, &cov).unwrap().abs() < 1e-12);
        assert_eq!(oracle_mahalanobis_full(&mean, &mean, &cov).unwrap(), 0.0);
    }

    #[test]
    fn rejects_indefinite_or_oversized() {
        let bad = diag(&[1.0, -1.0]);
        assert_eq!(
            oracle_kl_full(&[0.0, 0.0], &bad, &[0.0, 0.0], &diag(&[1.0, 1.0])).unwrap_err(),
            Error::NotPositiveDefinite
        );
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(
            oracle_mahalanobis_full(&[0.0, 0.0], &[1.0, 0.0], &asym).unwrap_err(),
            Error::NotPositiveDefinite
        );
        let big = DMatrix::identity(9, 9);
        assert!(oracle_mahalanobis_full(&[0.0; 9], &[0.0; 9], &big).is_err());
    }

    #[test]
    fn w2_of_commuting_diagonals() {
        // diagonal covariances commute, so the trace term is Σ(√a − √b)²
        let v = oracle_w2_full(&[0.0, 0.0], &diag(&[1.0, 4.0]), &[1.0, 0.0], &diag(&[9.0, 1.0])).unwrap();
        assert!((v - (1.0 + 4.0 + 1.0)).abs() < 1e-12);
    }
}
