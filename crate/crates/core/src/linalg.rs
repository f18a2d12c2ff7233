//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `m - m^T`.
pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky
/// factor.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))
}

/// Solves `m x = b` for symmetric positive-definite `m`.
pub fn spd_solve(m: &Mat, b: &Mat) -> Result<Mat> {
    m.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))
}

/// 2-norm condition number from the singular values (infinite when singular).
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || max == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `rel_tol * sigma_max` treated as zero.
pub fn pseudo_inverse(m: &Mat, rel_tol: f64) -> Mat {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Mat::zeros(c, r);
    }
    let eps = rel_tol * smax;
    svd.pseudo_inverse(eps).unwrap_or_else(|_| Mat::zeros(c, r))
}

/// Largest Euclidean norm among the vectors.
pub fn sup_norm(vs: &[Vector]) -> f64 {
    vs.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest pointwise distance between two vector sequences.
pub fn sup_distance(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// `(1 - theta) a + theta b`.
pub fn lerp(a: &Mat, b: &Mat, theta: f64) -> Mat {
    if theta == 0.0 {
        a.clone()
    } else if theta == 1.0 {
        b.clone()
    } else {
        a * (1.0 - theta) + b * theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spd_inverse_round_trip() {
        let m = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m).unwrap();
        assert_relative_eq!(&m * inv, Mat::identity(2, 2), epsilon = 1e-14);
        assert!(spd_inverse(&Mat::from_row_slice(1, 1, &[-1.0])).is_err());
    }

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pseudo_inverse(&m, 1e-12);
        assert_relative_eq!(p, Mat::from_element(2, 2, 0.25), epsilon = 1e-14);
    }

    #[test]
    fn condition_of_singular_matrix_is_infinite() {
        assert!(condition_number(&Mat::zeros(2, 2)).is_infinite());
        assert_relative_eq!(condition_number(&Mat::from_diagonal_element(3, 3, 2.0)), 1.0);
    }

    #[test]
    fn min_eigenvalue_uses_symmetric_part() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 4.0, 0.0, 1.0]);
        assert_relative_eq!(min_sym_eigenvalue(&m), -1.0, epsilon = 1e-12);
    }
}
