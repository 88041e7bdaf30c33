//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute symmetry tolerance, scaled by `max(1, max|M_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Relative PSD tolerance (relative to the largest eigenvalue magnitude).
pub const PSD_TOL: f64 = 1e-9;

/// Largest absolute entry of `M - Mᵀ`.
pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max(libm::fabs(m[(i, j)] - m[(j, i)]));
        }
    }
    worst
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(libm::fabs(*x)))
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= tol * max_abs(m).max(1.0)
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order. Only the lower
/// triangle of `m` is trusted; the input is symmetrized first.
pub fn symmetric_eigenvalues(m: &Mat) -> Result<Vector> {
    let s = symmetrize(m);
    let eig = s
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::NumericalFailure("symmetric eigendecomposition did not converge"))?;
    let mut vals: alloc::vec::Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue"));
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(Vector::from_vec(vals))
}

pub(crate) fn min_eigenvalue(m: &Mat) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(symmetric_eigenvalues(m)?[0])
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn psd_margin(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what: "psd_margin (square matrix)",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::NotSymmetric {
            asymmetry: asymmetry(m),
        });
    }
    min_eigenvalue(m)
}

/// `sᵀ P s`.
pub fn quad_form(p: &Mat, s: &Vector) -> f64 {
    let ps = p * s;
    s.dot(&ps)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(p: &Mat) -> Result<Mat> {
    let chol = symmetrize(p).cholesky().ok_or(Error::SingularMatrix)?;
    Ok(chol.inverse())
}

/// General inverse via LU.
pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone().try_inverse().ok_or(Error::SingularMatrix)
}

/// Symmetric `P^(-1/2)` for SPD `P`.
pub fn inv_sqrt_spd(p: &Mat) -> Result<Mat> {
    let eig = symmetrize(p)
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::NumericalFailure("symmetric eigendecomposition did not converge"))?;
    let mut diag = eig.eigenvalues.clone();
    for v in diag.iter_mut() {
        if *v <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: *v });
        }
        *v = 1.0 / libm::sqrt(*v);
    }
    let q = &eig.eigenvectors;
    Ok(q * Mat::from_diagonal(&diag) * q.transpose())
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(m: &Mat) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, z| acc.max(libm::hypot(z.re, z.im)))
}

/// Projection onto `{X : X ⪰ floor·I}` in Frobenius norm.
pub(crate) fn project_psd_floor(m: &Mat, floor: f64) -> Result<Mat> {
    let eig = symmetrize(m)
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::NumericalFailure("symmetric eigendecomposition did not converge"))?;
    let mut diag = eig.eigenvalues.clone();
    let mut changed = false;
    for v in diag.iter_mut() {
        if *v < floor {
            *v = floor;
            changed = true;
        }
    }
    if !changed {
        return Ok(symmetrize(m));
    }
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * Mat::from_diagonal(&diag) * q.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_margin_examples() {
        assert_eq!(psd_margin(&Mat::identity(2, 2)).unwrap(), 1.0);
        let d = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0]);
        assert!((psd_margin(&d).unwrap() + 2.0).abs() < 1e-14);
        // roots of (2-x)^2 - 1 are 1 and 3
        let m = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((psd_margin(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_margin_rejects_asymmetric() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(psd_margin(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let p = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = inv_sqrt_spd(&p).unwrap();
        let back = &r * &r * &p;
        assert!((back - Mat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn spectral_radius_of_rotation_scaled() {
        let m = Mat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn floor_projection_lifts_negative_eigenvalues() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = project_psd_floor(&m, 0.1).unwrap();
        assert!((psd_margin(&p).unwrap() - 0.1).abs() < 1e-12);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
    }
}
