//! Exponential and logarithm maps on `G(r, n)`.

use nalgebra::DMatrix;

use super::{HorizontalLift, SubspacePoint};
use crate::error::{Error, Result};
use crate::linalg;
use crate::pod::StiefelBasis;

/// Largest condition number of `Phi0^T Phi1` accepted by [`log_map`].
pub const ALIGNMENT_CONDITION_LIMIT: f64 = 1e12;

/// `span(Phi V cos(S) + U sin(S))` for the thin SVD `Z = U S V^T`.
///
/// The result is re-orthonormalized, since the formula is exactly orthonormal
/// only for fully horizontal `Z`.
pub fn exp_map(phi: &StiefelBasis, z: &HorizontalLift) -> Result<SubspacePoint> {
    let p = phi.matrix();
    if z.0.shape() != p.shape() {
        return Err(Error::DimensionMismatch(format!(
            "lift is {}x{}, basepoint is {}x{}",
            z.0.nrows(),
            z.0.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    if z.0.iter().all(|v| *v == 0.0) {
        return SubspacePoint::from_matrix(p);
    }
    let (u, sigma, vt) = linalg::thin_svd(&z.0);
    let v = vt.transpose();
    let r = p.ncols();
    let cos = DMatrix::from_diagonal(&sigma.map(f64::cos));
    let sin = DMatrix::from_diagonal(&sigma.map(f64::sin));
    let moved = p * v * cos + u.columns(0, r) * sin;
    SubspacePoint::from_matrix(&moved)
}

/// `Z = U atan(S) V^T` for the thin SVD of `Phi1 (Phi0^T Phi1)^{-1} - Phi0`.
pub fn log_map(phi0: &StiefelBasis, phi1: &StiefelBasis) -> Result<HorizontalLift> {
    let (p0, p1) = (phi0.matrix(), phi1.matrix());
    if p0.shape() != p1.shape() {
        return Err(Error::DimensionMismatch(format!(
            "bases are {}x{} and {}x{}",
            p0.nrows(),
            p0.ncols(),
            p1.nrows(),
            p1.ncols()
        )));
    }
    let align = p0.transpose() * p1;
    let s = linalg::singular_values(&align);
    let condition = s.max() / s.min();
    if !(condition <= ALIGNMENT_CONDITION_LIMIT) {
        return Err(Error::SingularAlignment { condition });
    }
    let inv = align.try_inverse().ok_or(Error::SingularAlignment { condition })?;
    let m = p1 * inv - p0;
    let (u, sigma, vt) = linalg::thin_svd(&m);
    let atan = DMatrix::from_diagonal(&sigma.map(f64::atan));
    Ok(HorizontalLift(u * atan * vt))
}
