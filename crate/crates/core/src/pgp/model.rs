//! Training and prediction for the projected Gaussian process.
//!
//! Training subspaces are mapped to coordinates `y_i` in the frame of a fixed
//! basepoint `mu`. The coordinates share the prior `N(0, Omega (x) sigma_K^2 I)`,
//! so with `Y` the `k x (nr-r)` matrix of stacked `y_i` the predictive mean is
//! `u* = Y^T Omega^{-1} omega*` and the predictive covariance is
//! `c* sigma_K^2 I` with `c* = omega** - omega*^T Omega^{-1} omega*`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::kernel::KernelSpec;
use crate::error::{Error, Result};
use crate::grassmann::{build_lift_frame, exp_map, log_map, principal_angles_between, LiftFrame, SubspacePoint, TangentCoordinates};
use crate::pde::{ParameterPoint, SnapshotMatrix, Standardization};
use crate::pod::{compute_global_pod, compute_pod_with, PodOptions, StiefelBasis};

/// Relative diagonal jitter added to `Omega` before factorization.
pub const JITTER: f64 = 1e-10;

/// Largest accepted condition number of the jittered `Omega`.
pub const KERNEL_CONDITION_LIMIT: f64 = 1e12;

/// Lower bound on the profiled `sigma_K`, reached only by all-zero coordinates.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub enum BasepointChoice {
    #[default]
    GlobalPod,
    Training(usize),
    /// The training subspace whose largest principal angle to any other
    /// training subspace is smallest. Useful when the pooled basis is
    /// orthogonal to some training subspace, e.g. under a symmetric design.
    Central,
    Explicit(StiefelBasis),
}

/// Per-point and pooled POD bases of a training set.
#[derive(Clone, Debug)]
pub struct TrainingBases {
    pub thetas: Vec<ParameterPoint>,
    pub bases: Vec<StiefelBasis>,
    pub global: StiefelBasis,
}

impl TrainingBases {
    pub fn compute(samples: &[SnapshotMatrix], r: usize, opts: PodOptions) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("training set is empty".into()));
        }
        let bases = samples
            .par_iter()
            .map(|s| compute_pod_with(&s.data, r, opts).map(|p| p.basis))
            .collect::<Result<Vec<_>>>()?;
        let global = compute_global_pod(samples.iter().map(|s| &s.data), r, opts)?.basis;
        Ok(Self { thetas: samples.iter().map(|s| s.theta.clone()).collect(), bases, global })
    }

    pub fn r(&self) -> usize {
        self.global.r()
    }

    pub fn basepoint(&self, choice: &BasepointChoice) -> Result<StiefelBasis> {
        match choice {
            BasepointChoice::GlobalPod => Ok(self.global.clone()),
            BasepointChoice::Training(i) => self
                .bases
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::InvalidConfig(format!("basepoint index {i} out of range"))),
            BasepointChoice::Central => Ok(self.bases[self.central_index()?].clone()),
            BasepointChoice::Explicit(b) => Ok(b.clone()),
        }
    }

    /// Index minimizing the largest principal angle to the other bases;
    /// ties go to the lowest index.
    pub fn central_index(&self) -> Result<usize> {
        let k = self.bases.len();
        let worst = (0..k)
            .into_par_iter()
            .map(|i| {
                (0..k).filter(|j| *j != i).try_fold(0.0f64, |acc, j| {
                    let a = principal_angles_between(self.bases[i].matrix(), self.bases[j].matrix())?;
                    Ok(acc.max(a.max()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(worst.iter().enumerate().fold(0, |best, (i, w)| if *w < worst[best] { i } else { best }))
    }

    pub fn subspaces(&self) -> Vec<(ParameterPoint, SubspacePoint)> {
        self.thetas.iter().cloned().zip(self.bases.iter().cloned().map(SubspacePoint::new)).collect()
    }
}

/// Factorization of the jittered kernel matrix.
#[derive(Clone, Debug)]
pub(crate) struct KernelFactor {
    pub chol: Cholesky<f64, Dyn>,
}

impl KernelFactor {
    pub(crate) fn new(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<Self> {
        let mut omega = kernel.matrix(points);
        let k = points.len();
        let jitter = JITTER * omega.diagonal().mean();
        for i in 0..k {
            omega[(i, i)] += jitter;
        }
        let eig = omega.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= KERNEL_CONDITION_LIMIT) {
            return Err(Error::IllConditionedKernel { condition });
        }
        let chol = Cholesky::new(omega).ok_or(Error::IllConditionedKernel { condition })?;
        Ok(Self { chol })
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct PredictiveDistribution {
    /// Predictive mean `u*`, after shrinkage.
    pub mean_coords: TangentCoordinates,
    /// `c*`: the predictive covariance is `c* sigma_K^2 I`.
    pub variance_scale: f64,
    pub map_subspace: SubspacePoint,
    /// Whether `u*` was pulled back onto the `pi/2` sphere.
    pub shrunk: bool,
}

/// Scales `y` onto the `pi/2` sphere when it lies outside; returns whether it did.
pub fn shrink_to_injectivity(y: &mut DVector<f64>) -> bool {
    let norm = y.norm();
    if norm > FRAC_PI_2 {
        *y *= FRAC_PI_2 / norm;
        true
    } else {
        false
    }
}

#[derive(Clone, Debug)]
pub struct PgpModel {
    frame: LiftFrame,
    thetas: Vec<ParameterPoint>,
    standardization: Standardization,
    points: Vec<Vec<f64>>,
    coords: DMatrix<f64>,
    kernel: KernelSpec,
    sigma_k: f64,
    factor: KernelFactor,
}

impl PgpModel {
    /// POD of every training matrix, global-POD (or chosen) basepoint,
    /// coordinates and kernel factorization. `sigma_K` is profiled.
    pub fn train(
        samples: &[SnapshotMatrix],
        r: usize,
        kernel: KernelSpec,
        basepoint: &BasepointChoice,
        pod: PodOptions,
    ) -> Result<Self> {
        let bases = TrainingBases::compute(samples, r, pod)?;
        Self::from_bases(&bases, kernel, basepoint)
    }

    pub fn from_bases(bases: &TrainingBases, kernel: KernelSpec, basepoint: &BasepointChoice) -> Result<Self> {
        Self::from_subspaces(&bases.subspaces(), bases.basepoint(basepoint)?, kernel)
    }

    pub fn from_subspaces(
        train: &[(ParameterPoint, SubspacePoint)],
        basepoint: StiefelBasis,
        kernel: KernelSpec,
    ) -> Result<Self> {
        let frame = build_lift_frame(&basepoint)?;
        let rows = train
            .par_iter()
            .map(|(_, s)| frame.to_coords(&log_map(&basepoint, s.basis())?).map(|y| y.0))
            .collect::<Result<Vec<_>>>()?;
        let mut coords = DMatrix::zeros(rows.len(), frame.dim());
        for (i, y) in rows.iter().enumerate() {
            coords.set_row(i, &y.transpose());
        }
        let thetas = train.iter().map(|(t, _)| t.clone()).collect();
        Self::from_frame(frame, thetas, coords, kernel, None)
    }

    /// A model over explicit coordinates (row `i` of `coords` belongs to
    /// `thetas[i]`). `sigma_k = None` profiles it from the data.
    pub fn from_coordinates(
        basepoint: StiefelBasis,
        thetas: Vec<ParameterPoint>,
        coords: DMatrix<f64>,
        kernel: KernelSpec,
        sigma_k: Option<f64>,
    ) -> Result<Self> {
        Self::from_frame(build_lift_frame(&basepoint)?, thetas, coords, kernel, sigma_k)
    }

    fn from_frame(
        frame: LiftFrame,
        thetas: Vec<ParameterPoint>,
        coords: DMatrix<f64>,
        kernel: KernelSpec,
        sigma_k: Option<f64>,
    ) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidConfig("training set is empty".into()));
        }
        if coords.shape() != (thetas.len(), frame.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "coordinates are {}x{}, expected {}x{}",
                coords.nrows(),
                coords.ncols(),
                thetas.len(),
                frame.dim()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("training coordinates are not finite".into()));
        }
        let standardization = Standardization::fit(&thetas)?;
        let points = thetas.iter().map(|t| standardization.apply(t)).collect::<Result<Vec<_>>>()?;
        kernel.validate(thetas[0].dim())?;
        let factor = KernelFactor::new(&kernel, &points)?;
        let sigma_k = match sigma_k {
            Some(s) if s > 0.0 && s.is_finite() => s,
            Some(s) => return Err(Error::InvalidConfig(format!("sigma_K must be positive, got {s}"))),
            None => profiled_sigma(&factor, &(&coords * coords.transpose()), frame.dim()),
        };
        Ok(Self { frame, thetas, standardization, points, coords, kernel, sigma_k, factor })
    }

    /// Same training data under a different kernel; `sigma_k = None` profiles it.
    pub fn with_kernel(&self, kernel: KernelSpec, sigma_k: Option<f64>) -> Result<Self> {
        Self::from_frame(self.frame.clone(), self.thetas.clone(), self.coords.clone(), kernel, sigma_k)
    }

    pub fn basepoint(&self) -> &StiefelBasis {
        self.frame.basepoint()
    }

    pub fn frame(&self) -> &LiftFrame {
        &self.frame
    }

    pub fn thetas(&self) -> &[ParameterPoint] {
        &self.thetas
    }

    pub(crate) fn standardized_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// `k x (nr-r)` matrix of training coordinates.
    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn sigma_k(&self) -> f64 {
        self.sigma_k
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn r(&self) -> usize {
        self.frame.r()
    }

    pub fn predict(&self, theta: &ParameterPoint) -> Result<PredictiveDistribution> {
        let x = self.standardization.apply(theta)?;
        let w = self.kernel.cross(&self.points, &x);
        let alpha = self.factor.chol.solve(&w);
        let mut u = self.coords.tr_mul(&alpha);
        let variance_scale = (self.kernel.eval(&x, &x) - w.dot(&alpha)).max(0.0);
        let shrunk = shrink_to_injectivity(&mut u);
        let mean_coords = TangentCoordinates(u);
        let map_subspace = exp_map(self.basepoint(), &self.frame.to_lift(&mean_coords)?)?;
        Ok(PredictiveDistribution { mean_coords, variance_scale, map_subspace, shrunk })
    }
}

/// `sqrt(tr(Omega^{-1} G) / (m k))`, floored at [`SIGMA_FLOOR`].
pub(crate) fn profiled_sigma(factor: &KernelFactor, gram: &DMatrix<f64>, m: usize) -> f64 {
    let k = gram.nrows();
    let trace = factor.chol.solve(gram).trace();
    (trace / (m * k) as f64).max(0.0).sqrt().max(SIGMA_FLOOR)
}
