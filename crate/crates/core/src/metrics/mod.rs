//! Quality metrics for predicted POD bases and method comparisons.
//!
//! For a snapshot matrix `D` and a predicted basis `Phi`:
//!
//! - `e_F = ||D - Phi Phi^T D||_F^2`;
//! - `e_R = 100 (e_F - e*) / e*`, with `e*` the error of the optimal rank-r basis;
//! - `e_A`, the geodesic distance to the optimal subspace;
//! - `e_I`, the largest column-wise l1 norm of the residual.

mod compare;

pub use compare::{
    compare_methods, compare_with_bases, loocv, write_report_csv, write_summary_json, InterpBasepointChoice, Method, MethodSpec,
    MethodSummary, Metric, MetricReport, PairwiseWins, PointRecord, Summary, TIE_TOL,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grassmann::principal_angles_between;
use crate::pod::{compute_pod, StiefelBasis};

/// `e*` at or below this multiple of `max(1, ||D||_F^2)` counts as zero.
pub const ZERO_OPTIMAL_REL: f64 = 1e-14;

pub fn error_frobenius(d: &DMatrix<f64>, phi: &StiefelBasis) -> Result<f64> {
    Ok(phi.residual(d)?.norm_squared())
}

/// Projection error of the optimal rank-`r` basis of `d`.
pub fn optimal_error(d: &DMatrix<f64>, r: usize) -> Result<f64> {
    error_frobenius(d, &compute_pod(d, r)?.basis)
}

/// `e_R` in percent from a precomputed `e_F` and `e*`.
pub fn relative_from(e_f: f64, e_star: f64, d: &DMatrix<f64>) -> Result<f64> {
    if e_star <= ZERO_OPTIMAL_REL * d.norm_squared().max(1.0) {
        return Err(Error::ZeroOptimalError);
    }
    Ok(100.0 * (e_f - e_star) / e_star)
}

pub fn error_relative(d: &DMatrix<f64>, phi: &StiefelBasis, r: usize) -> Result<f64> {
    relative_from(error_frobenius(d, phi)?, optimal_error(d, r)?, d)
}

/// Geodesic distance between the spans of two bases.
pub fn error_angle(optimal: &StiefelBasis, predicted: &StiefelBasis) -> Result<f64> {
    Ok(principal_angles_between(optimal.matrix(), predicted.matrix())?.norm())
}

/// `||(D - Phi Phi^T D)^T||_inf`, the largest l1 norm of a residual column.
pub fn error_infinity(d: &DMatrix<f64>, phi: &StiefelBasis) -> Result<f64> {
    let res = phi.residual(d)?;
    Ok(res.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{gaussian_matrix, random_stiefel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn optimal_basis_attains_the_tail_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = gaussian_matrix(&mut rng, 20, 10);
        let pod = compute_pod(&d, 3).unwrap();
        let tail: f64 = pod.singular_values.iter().skip(3).map(|s| s * s).sum();
        assert!((error_frobenius(&d, &pod.basis).unwrap() - tail).abs() < 1e-8 * tail);
        assert!(error_relative(&d, &pod.basis, 3).unwrap().abs() < 1e-8);
    }

    #[test]
    fn basis_spanning_a_low_rank_matrix_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = random_stiefel(&mut rng, 10, 2);
        let d = phi.matrix() * gaussian_matrix(&mut rng, 2, 6);
        assert!(error_frobenius(&d, &phi).unwrap() < 1e-24);
        assert!(error_infinity(&d, &phi).unwrap() < 1e-12);
        assert!(matches!(error_relative(&d, &phi, 2), Err(Error::ZeroOptimalError)));
    }

    #[test]
    fn orthogonal_basis_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = random_stiefel(&mut rng, 8, 4);
        let (inside, outside) = (full.matrix().columns(0, 2), full.matrix().columns(2, 2));
        let d = inside * gaussian_matrix(&mut rng, 2, 5);
        let phi = StiefelBasis::new(outside.into_owned()).unwrap();
        assert!((error_frobenius(&d, &phi).unwrap() - d.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn relative_error_of_a_doubled_error_is_one_hundred_percent() {
        let d = DMatrix::identity(3, 3);
        assert!((relative_from(2.0, 1.0, &d).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn infinity_error_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let d = gaussian_matrix(&mut rng, 5, 3);
            let phi = random_stiefel(&mut rng, 5, 2);
            let res = phi.residual(&d).unwrap();
            let mut brute = 0.0f64;
            for j in 0..3 {
                let mut s = 0.0;
                for i in 0..5 {
                    s += res[(i, j)].abs();
                }
                brute = brute.max(s);
            }
            assert!((error_infinity(&d, &phi).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn single_entry_residual() {
        let phi = StiefelBasis::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let d = DMatrix::from_column_slice(2, 2, &[3.0, 0.0, 0.0, -0.25]);
        assert_eq!(error_infinity(&d, &phi).unwrap(), 0.25);
    }

    #[test]
    fn angle_on_the_circle() {
        let a = StiefelBasis::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let t = 0.3f64;
        let b = StiefelBasis::new(DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()])).unwrap();
        assert!((error_angle(&a, &b).unwrap() - t).abs() < 1e-10);
        assert_eq!(error_angle(&a, &a).unwrap(), 0.0);
    }
}
