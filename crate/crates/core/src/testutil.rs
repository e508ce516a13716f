//! Random geometric fixtures for unit tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::grassmann::HorizontalLift;
use crate::linalg;
use crate::pod::StiefelBasis;

pub(crate) fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub(crate) fn random_stiefel(rng: &mut impl Rng, n: usize, r: usize) -> StiefelBasis {
    StiefelBasis::new(linalg::orthonormalize(&gaussian_matrix(rng, n, r))).unwrap()
}

pub(crate) fn random_orthogonal(rng: &mut impl Rng, r: usize) -> DMatrix<f64> {
    linalg::orthonormalize(&gaussian_matrix(rng, r, r))
}

/// A random `Z` with `Z^T Phi = 0` and `||Z||_F = norm`.
pub(crate) fn random_horizontal(rng: &mut impl Rng, phi: &StiefelBasis, norm: f64) -> HorizontalLift {
    let p = phi.matrix();
    let g = gaussian_matrix(rng, p.nrows(), p.ncols());
    let z = &g - p * (p.transpose() * &g);
    let scale = norm / z.norm();
    HorizontalLift(z * scale)
}
