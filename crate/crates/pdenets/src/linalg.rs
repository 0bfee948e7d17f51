//! Small dense least-squares helper shared by the fitting routines.

use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `a x ≈ b`, discarding singular
/// values below `rcond * σ_max`.
pub fn lstsq(a: DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = (rcond * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, cutoff).expect("SVD computed with both factors")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_fit() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let x = lstsq(a, &b, 1e-15);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
