//! Desk-scale experiment presets and dataset assembly.

use rayon::prelude::*;

use crate::dataset::{Dataset, GridDescription, Split};
use crate::error::{Error, Result};
use crate::pde::{build_parameter_grid, simulate_advection_diffusion, GridAxis, ParameterPoint, SnapshotMatrix, SolverConfig};

/// Grid specification of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyPreset {
    pub solver: SolverConfig,
    pub train: Vec<GridAxis>,
    /// Test grid; points that are also training points are dropped.
    pub test: Vec<GridAxis>,
    pub r: usize,
}

/// Diffusivities `(d1, d2)` in `[0.01, 0.05]^2` at unit rightward velocity:
/// 3 x 3 training grid, 11 x 11 test grid.
pub fn two_parameter_desk() -> StudyPreset {
    let axes = |step| vec![GridAxis::new("d1", 0.01, 0.05, step), GridAxis::new("d2", 0.01, 0.05, step)];
    StudyPreset { solver: SolverConfig::default(), train: axes(0.02), test: axes(0.004), r: 5 }
}

/// Velocities `(v1, v2)` in `[-0.1, 0.1]^2` (step 0.05) and diffusivities
/// `(d1, d2)` in `{0.01, 0.03, 0.05}^2`. Training only; there is no test grid.
pub fn four_parameter_desk() -> StudyPreset {
    let train = vec![
        GridAxis::new("v1", -0.1, 0.1, 0.05),
        GridAxis::new("v2", -0.1, 0.1, 0.05),
        GridAxis::new("d1", 0.01, 0.05, 0.02),
        GridAxis::new("d2", 0.01, 0.05, 0.02),
    ];
    StudyPreset { solver: SolverConfig::default(), train, test: Vec::new(), r: 5 }
}

/// Group map of [`four_parameter_desk`]: velocities share group 0,
/// diffusivities group 1.
pub const FOUR_PARAMETER_GROUPS: [usize; 4] = [0, 0, 1, 1];

/// Seven isotropic diffusivities `d` in `[0.01, 0.05]` for leave-one-out.
pub fn loocv_sweep() -> StudyPreset {
    let train = vec![GridAxis::new("d", 0.01, 0.05, 0.04 / 6.0)];
    StudyPreset { solver: SolverConfig::default(), train, test: Vec::new(), r: 5 }
}

/// Simulates every point in parallel, preserving order.
pub fn simulate_all(points: &[ParameterPoint], solver: &SolverConfig) -> Result<Vec<SnapshotMatrix>> {
    points.par_iter().map(|p| simulate_advection_diffusion(p, solver)).collect()
}

/// Training points and the test points not among them.
pub fn split_points(train: &[GridAxis], test: &[GridAxis]) -> Result<(Vec<ParameterPoint>, Vec<ParameterPoint>)> {
    let train_pts = build_parameter_grid(train)?;
    let test_pts = if test.is_empty() {
        Vec::new()
    } else {
        build_parameter_grid(test)?.into_iter().filter(|p| !train_pts.contains(p)).collect()
    };
    if let (Some(a), Some(b)) = (train_pts.first(), test_pts.first()) {
        if a.names() != b.names() {
            return Err(Error::InvalidConfig("training and test grids name different parameters".into()));
        }
    }
    Ok((train_pts, test_pts))
}

/// Simulates both grids of `preset` into a tagged dataset.
pub fn build_dataset(preset: &StudyPreset, pod_centering: bool) -> Result<Dataset> {
    let (train, test) = split_points(&preset.train, &preset.test)?;
    let mut points = train.clone();
    points.extend(test.iter().cloned());
    let sims = simulate_all(&points, &preset.solver)?;
    let samples = sims
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, if i < train.len() { Split::Train } else { Split::Test }))
        .collect();
    let mut grids = vec![GridDescription { role: "train".into(), axes: preset.train.clone() }];
    if !preset.test.is_empty() {
        grids.push(GridDescription { role: "test".into(), axes: preset.test.clone() });
    }
    Ok(Dataset { samples, grids, solver: preset.solver.clone(), pod_centering })
}
