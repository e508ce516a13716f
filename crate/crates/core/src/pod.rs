//! Truncated POD bases from thin SVDs of snapshot matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `||Phi^T Phi - I||_F` accepted for a Stiefel basis.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// An `n x r` matrix with orthonormal columns, `2r <= n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelBasis {
    matrix: DMatrix<f64>,
}

impl StiefelBasis {
    /// Wraps an orthonormal matrix, checking dimensions and orthonormality.
    /// Column signs are left untouched.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (n, r) = matrix.shape();
        if r == 0 || 2 * r > n {
            return Err(Error::DimensionMismatch(format!("a Stiefel basis needs 1 <= r and 2r <= n, got {n}x{r}")));
        }
        let defect = linalg::orthonormality_defect(&matrix);
        if !(defect < ORTHONORMALITY_TOL) {
            return Err(Error::DimensionMismatch(format!("columns are not orthonormal (defect {defect:e})")));
        }
        Ok(Self { matrix })
    }

    /// Orthonormalizes any full-column-rank matrix (QR with positive diagonal)
    /// and applies the sign convention.
    pub fn orthonormalized(m: &DMatrix<f64>) -> Result<Self> {
        let mut q = linalg::orthonormalize(m);
        linalg::canonicalize_signs(&mut q);
        Self::new(q)
    }

    /// Applies the sign convention: the largest-magnitude entry of every
    /// column is positive, ties going to the lowest row index.
    pub fn canonical(mut self) -> Self {
        linalg::canonicalize_signs(&mut self.matrix);
        self
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn r(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Projection residual `D - Phi Phi^T D`.
    pub fn residual(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.nrows() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} rows, data has {}",
                self.n(),
                data.nrows()
            )));
        }
        let coeffs = self.matrix.transpose() * data;
        Ok(data - &self.matrix * coeffs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PodResult {
    pub basis: StiefelBasis,
    /// All `min(n, n_T)` singular values, non-increasing.
    pub singular_values: DVector<f64>,
    /// Share of `sum sigma_i^2` captured by the first `r` modes.
    pub energy_fraction: f64,
}

impl PodResult {
    /// `sum_{i > r} sigma_i^2`, the optimal rank-r projection error.
    pub fn truncation_error(&self) -> f64 {
        self.singular_values.iter().skip(self.basis.r()).map(|s| s * s).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodOptions {
    /// Subtract the temporal mean of every spatial DOF before the SVD.
    pub center: bool,
}

/// Rank-`r` POD basis of a snapshot matrix: the `r` leading left singular
/// vectors, sign-normalized.
pub fn compute_pod(data: &DMatrix<f64>, r: usize) -> Result<PodResult> {
    compute_pod_with(data, r, PodOptions::default())
}

pub fn compute_pod_with(data: &DMatrix<f64>, r: usize, opts: PodOptions) -> Result<PodResult> {
    let (n, n_t) = data.shape();
    if r == 0 || r > n.min(n_t) || 2 * r > n {
        return Err(Error::RankTooLarge { r, rows: n, cols: n_t });
    }
    if data.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateData);
    }
    let (u, sigma, _) = if opts.center {
        let mean = data.column_mean();
        let mut centered = data.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        linalg::thin_svd(&centered)
    } else {
        linalg::thin_svd(data)
    };
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData);
    }
    let captured: f64 = sigma.iter().take(r).map(|s| s * s).sum();
    let basis = StiefelBasis::new(u.columns(0, r).into_owned())?.canonical();
    Ok(PodResult { basis, singular_values: sigma, energy_fraction: captured / total })
}

/// POD of the column-wise concatenation of several snapshot matrices.
pub fn compute_global_pod<'a>(
    matrices: impl IntoIterator<Item = &'a DMatrix<f64>>,
    r: usize,
    opts: PodOptions,
) -> Result<PodResult> {
    let matrices: Vec<&DMatrix<f64>> = matrices.into_iter().collect();
    let Some(first) = matrices.first() else {
        return Err(Error::DimensionMismatch("global POD needs at least one matrix".into()));
    };
    let n = first.nrows();
    if let Some(bad) = matrices.iter().find(|m| m.nrows() != n) {
        return Err(Error::DimensionMismatch(format!("snapshot matrices have {n} and {} rows", bad.nrows())));
    }
    let total_cols: usize = matrices.iter().map(|m| m.ncols()).sum();
    let mut pooled = DMatrix::zeros(n, total_cols);
    let mut offset = 0;
    for m in &matrices {
        pooled.columns_mut(offset, m.ncols()).copy_from(m);
        offset += m.ncols();
    }
    compute_pod_with(&pooled, r, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn rank_one_analytic_case() {
        let d = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let pod = compute_pod(&d, 1).unwrap();
        assert!((pod.basis.matrix() - DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).norm() < 1e-14);
        assert!((pod.singular_values[0] - 5f64.sqrt()).abs() < 1e-14);
        assert!((pod.energy_fraction - 1.0).abs() < 1e-14);
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let d = random_matrix(10, 4, 3);
        let pod = compute_pod(&d, 4).unwrap();
        assert!(pod.basis.residual(&d).unwrap().norm_squared() < 1e-8);
    }

    #[test]
    fn rank_and_degeneracy_errors() {
        let d = random_matrix(6, 4, 1);
        assert!(matches!(compute_pod(&d, 0), Err(Error::RankTooLarge { .. })));
        assert!(matches!(compute_pod(&d, 5), Err(Error::RankTooLarge { .. })));
        // 2r <= n fails before r <= min(n, n_T).
        assert!(matches!(compute_pod(&random_matrix(6, 6, 1), 4), Err(Error::RankTooLarge { .. })));
        assert!(matches!(compute_pod(&DMatrix::zeros(6, 3), 1), Err(Error::DegenerateData)));
    }

    #[test]
    fn sign_convention_makes_pod_deterministic() {
        let d = random_matrix(12, 5, 9);
        let a = compute_pod(&d, 3).unwrap();
        let b = compute_pod(&(-&d), 3).unwrap();
        assert!((a.basis.matrix() - b.basis.matrix()).norm() < 1e-12);
        for col in a.basis.matrix().column_iter() {
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn global_pod_of_one_matrix_matches_compute_pod() {
        let d = random_matrix(12, 5, 2);
        let a = compute_pod(&d, 2).unwrap();
        let b = compute_global_pod([&d], 2, PodOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn global_pod_rejects_mismatched_rows() {
        let a = random_matrix(12, 5, 2);
        let b = random_matrix(10, 5, 2);
        assert!(matches!(
            compute_global_pod([&a, &b], 2, PodOptions::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn centering_removes_the_temporal_mean() {
        let mut d = random_matrix(8, 6, 4);
        for mut col in d.column_iter_mut() {
            col.add_scalar_mut(5.0);
        }
        let plain = compute_pod(&d, 1).unwrap();
        let centered = compute_pod_with(&d, 1, PodOptions { center: true }).unwrap();
        // The uncentered leading mode is dominated by the constant offset.
        let ones = DVector::from_element(8, 1.0 / 8f64.sqrt());
        assert!(plain.basis.matrix().column(0).dot(&ones).abs() > 0.99);
        assert!(centered.basis.matrix().column(0).dot(&ones).abs() < 0.9);
    }
}
