//! Principal angles and the geodesic distance between subspaces.

use nalgebra::{DMatrix, DVector};

use super::SubspacePoint;
use crate::error::{Error, Result};
use crate::linalg;

/// Principal angles between the spans of two orthonormal `n x r` matrices,
/// non-decreasing.
///
/// `arccos` of the cosines loses about half the digits for small angles, so
/// angles up to `pi/4` come from the sines instead: the singular values of
/// `Q - P (P^T Q)`.
pub fn principal_angles_between(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DVector<f64>> {
    if p.shape() != q.shape() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces have shapes {}x{} and {}x{}",
            p.nrows(),
            p.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let cross = p.transpose() * q;
    let cosines = linalg::singular_values(&cross);
    let mut sines = linalg::singular_values(&(q - p * &cross));
    sines.as_mut_slice().sort_by(f64::total_cmp);
    let r = cosines.len();
    let mut angles = DVector::from_fn(r, |i, _| {
        let c = cosines[i].clamp(0.0, 1.0);
        if c * c >= 0.5 {
            sines[i].clamp(0.0, 1.0).asin()
        } else {
            c.acos()
        }
    });
    angles.as_mut_slice().sort_by(f64::total_cmp);
    Ok(angles)
}

pub fn principal_angles(p: &SubspacePoint, q: &SubspacePoint) -> Result<DVector<f64>> {
    principal_angles_between(p.basis().matrix(), q.basis().matrix())
}

/// `sqrt(sum theta_i^2)` over the principal angles.
pub fn geodesic_distance(p: &SubspacePoint, q: &SubspacePoint) -> Result<f64> {
    Ok(principal_angles(p, q)?.norm())
}
