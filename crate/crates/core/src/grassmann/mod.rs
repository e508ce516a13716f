//! Geometry of the Grassmann manifold `G(r, n)`.
//!
//! Subspaces are carried by orthonormal representatives. Tangent vectors are
//! horizontal lifts `Z` (`n x r`), and [`LiftFrame`] turns them into flat
//! coordinates in `R^{nr-r}` and back.

mod angles;
mod frame;
mod maps;

pub use angles::{geodesic_distance, principal_angles, principal_angles_between};
pub use frame::{
    build_lift_frame, coords_to_lift, diagonal_horizontality_defect, lift_to_coords, HorizontalLift, LiftFrame,
    TangentCoordinates, HORIZONTAL_TOL,
};
pub use maps::{exp_map, log_map, ALIGNMENT_CONDITION_LIMIT};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::pod::StiefelBasis;

/// Geodesic distance below which two subspaces count as equal.
pub const SUBSPACE_EQ_TOL: f64 = 1e-8;

/// A point of `G(r, n)`, stored through a sign-normalized representative.
#[derive(Clone, Debug)]
pub struct SubspacePoint {
    basis: StiefelBasis,
}

impl SubspacePoint {
    /// Keeps `basis` as the representative, up to the sign convention.
    pub fn new(basis: StiefelBasis) -> Self {
        Self { basis: basis.canonical() }
    }

    /// Span of the columns of `m`, which must have full column rank.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        StiefelBasis::orthonormalized(m).map(|basis| Self { basis })
    }

    pub fn basis(&self) -> &StiefelBasis {
        &self.basis
    }

    pub fn into_basis(self) -> StiefelBasis {
        self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn r(&self) -> usize {
        self.basis.r()
    }

    pub fn distance(&self, other: &SubspacePoint) -> Result<f64> {
        geodesic_distance(self, other)
    }

    /// Representation-independent equality within `tol` in geodesic distance.
    pub fn approx_eq(&self, other: &SubspacePoint, tol: f64) -> bool {
        self.distance(other).is_ok_and(|d| d < tol)
    }
}

impl From<StiefelBasis> for SubspacePoint {
    fn from(basis: StiefelBasis) -> Self {
        Self::new(basis)
    }
}
