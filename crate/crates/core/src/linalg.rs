//! Small dense helpers shared by the POD and geometry modules.

use nalgebra::{DMatrix, DVector, SVD};

/// Thin SVD with singular values sorted non-increasingly.
///
/// Returns `(U, sigma, V^T)` with `U` of size `rows x min(rows, cols)`.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("V^T requested");
    (u, svd.singular_values, vt)
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    SVD::new(m.clone(), false, false).singular_values
}

/// Flips column signs so that the entry of largest magnitude in every column
/// is positive. Ties go to the lowest row index.
pub(crate) fn canonicalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Q factor of a thin Householder QR, with columns flipped so that R has a
/// non-negative diagonal.
pub(crate) fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `||A^T A - I||_F`.
pub(crate) fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    (gram - DMatrix::identity(m.ncols(), m.ncols())).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention_prefers_lowest_index_on_ties() {
        let mut m = DMatrix::from_column_slice(3, 2, &[-0.5, 0.5, 0.1, 0.0, -2.0, 1.0]);
        canonicalize_signs(&mut m);
        assert_eq!(m.column(0).as_slice(), &[0.5, -0.5, -0.1]);
        assert_eq!(m.column(1).as_slice(), &[0.0, 2.0, -1.0]);
    }

    #[test]
    fn orthonormalize_keeps_positive_diagonal() {
        let m = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -2.0, 0.0, 0.0]);
        let q = orthonormalize(&m);
        assert!(orthonormality_defect(&q) < 1e-14);
        assert!((q[(0, 0)] + 1.0).abs() < 1e-14);
        assert!((q[(1, 1)] + 1.0).abs() < 1e-14);
    }
}
