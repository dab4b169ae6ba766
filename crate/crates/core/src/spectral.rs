//! Dense spectral helpers backing the test oracles and report summaries.
//!
//! These operate on analytic Hessians only and are never part of the
//! query-metered algorithm path.

use nalgebra::{DMatrix, DVector};

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(h: &DMatrix<f64>) -> f64 {
    let sym = nalgebra::SymmetricEigen::new(h.clone());
    sym.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Eigenvector for the smallest eigenvalue of a symmetric matrix, unit norm.
pub fn min_eigenpair(h: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let sym = nalgebra::SymmetricEigen::new(h.clone());
    let mut best = 0;
    for i in 1..sym.eigenvalues.len() {
        if sym.eigenvalues[i] < sym.eigenvalues[best] {
            best = i;
        }
    }
    let v = sym.eigenvectors.column(best).into_owned();
    (sym.eigenvalues[best], v)
}

/// Rayleigh quotient v^T H v / v^T v.
pub fn rayleigh(h: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (h * v).dot(v) / v.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_spectrum_recovered() {
        let h = DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, -2.0, 0.5]));
        assert!((lambda_min(&h) + 2.0).abs() < 1e-12);
        let (lam, v) = min_eigenpair(&h);
        assert!((lam + 2.0).abs() < 1e-12);
        assert!((v[1].abs() - 1.0).abs() < 1e-10);
        assert!((rayleigh(&h, &v) + 2.0).abs() < 1e-10);
    }

    #[test]
    fn rayleigh_of_scaled_vector_is_invariant() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let v = DVector::from_column_slice(&[1.0, 1.0]);
        let w = &v * 7.5;
        assert!((rayleigh(&h, &v) - rayleigh(&h, &w)).abs() < 1e-12);
        // (1,1) direction: (H v).v / 2 = (3 + 3)/2 = 3
        assert!((rayleigh(&h, &v) - 3.0).abs() < 1e-12);
    }
}
