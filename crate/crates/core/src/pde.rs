//! Snapshot generation for the 2-D advection-diffusion problem
//!
//! `dx/dt + v . grad x - div(D grad x) = 0` on a rectangle with homogeneous
//! Neumann walls, discretized with central differences for diffusion,
//! first-order upwinding for advection and forward Euler in time.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `theta` of the parameter space, with one label per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterPoint {
    names: Vec<String>,
    values: Vec<f64>,
}

impl ParameterPoint {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, values: Vec<f64>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let p = Self { names, values };
        p.validate()?;
        Ok(p)
    }

    /// Validates a point that came in through deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("parameter point has no components".into()));
        }
        if self.names.len() != self.values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} values",
                self.names.len(),
                self.values.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite component {v}")));
        }
        let unique: BTreeSet<&str> = self.names.iter().map(String::as_str).collect();
        if unique.len() != self.names.len() {
            return Err(Error::InvalidParameter(format!("duplicate names in {:?}", self.names)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Componentwise equality within `tol`, names included.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.names == other.names
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl std::fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (n, v)) in self.names.iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

/// Per-component affine map of parameter points onto `[0, 1]`, fitted to the
/// min/max of a training set. Constant components map to `0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub names: Vec<String>,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn fit<'a>(points: impl IntoIterator<Item = &'a ParameterPoint>) -> Result<Self> {
        let mut iter = points.into_iter();
        let first = iter.next().ok_or_else(|| Error::InvalidParameter("cannot standardize an empty set".into()))?;
        let mut lo = first.values.clone();
        let mut hi = first.values.clone();
        for p in iter {
            if p.names != first.names {
                return Err(Error::DimensionMismatch(format!("parameter names {:?} and {:?}", first.names, p.names)));
            }
            for (c, v) in p.values.iter().enumerate() {
                lo[c] = lo[c].min(*v);
                hi[c] = hi[c].max(*v);
            }
        }
        let scale = lo.iter().zip(&hi).map(|(l, h)| if h > l { h - l } else { 1.0 }).collect();
        Ok(Self { names: first.names.clone(), offset: lo, scale })
    }

    pub fn apply(&self, p: &ParameterPoint) -> Result<Vec<f64>> {
        if p.names != self.names {
            return Err(Error::DimensionMismatch(format!("expected parameters {:?}, got {:?}", self.names, p.names)));
        }
        Ok(p.values.iter().zip(self.offset.iter().zip(&self.scale)).map(|(v, (o, s))| (v - o) / s).collect())
    }
}

/// Snapshot matrix `D(theta)`: column `j` is the field at the `j`-th snapshot
/// time, flattened in row-major spatial order (`index = iy * nx + ix`).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    pub theta: ParameterPoint,
    pub data: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn new(theta: ParameterPoint, data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("snapshot matrix for {theta} has non-finite entries")));
        }
        Ok(Self { theta, data })
    }

    /// Spatial degrees of freedom.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of snapshots.
    pub fn n_t(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub n_snapshots: usize,
    pub blob_center: [f64; 2],
    pub blob_width: f64,
    pub blob_amplitude: f64,
    /// Velocity used when `theta` has no `v1`/`v2` components.
    pub velocity: [f64; 2],
    /// Diffusivity used when `theta` has no `d1`/`d2`/`d` components.
    pub diffusivity: [f64; 2],
    /// Fraction of the stability bound used for the time step.
    pub safety_factor: f64,
    /// Fixed time step; overrides `safety_factor` when set.
    pub dt: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nx: 41,
            ny: 41,
            lx: 1.0,
            ly: 1.0,
            t_final: 1.0,
            n_snapshots: 60,
            blob_center: [0.25, 0.5],
            blob_width: 0.08,
            blob_amplitude: 1.0,
            velocity: [1.0, 0.0],
            diffusivity: [0.01, 0.01],
            safety_factor: 0.4,
            dt: None,
        }
    }
}

impl SolverConfig {
    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    fn spacing(&self) -> (f64, f64) {
        (self.lx / (self.nx - 1) as f64, self.ly / (self.ny - 1) as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::InvalidConfig("grid needs at least 3 points per axis".into()));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.t_final > 0.0) {
            return Err(Error::InvalidConfig("domain size and t_final must be positive".into()));
        }
        if self.n_snapshots == 0 {
            return Err(Error::InvalidConfig("n_snapshots must be at least 1".into()));
        }
        if !(self.blob_width > 0.0) {
            return Err(Error::InvalidConfig("blob_width must be positive".into()));
        }
        Ok(())
    }
}

/// Physical coefficients resolved from a parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub velocity: [f64; 2],
    pub diffusivity: [f64; 2],
}

impl Coefficients {
    /// Components named `v1`, `v2`, `d1`, `d2` override the solver defaults;
    /// `d` sets both diffusivities.
    pub fn resolve(theta: &ParameterPoint, cfg: &SolverConfig) -> Result<Self> {
        let mut c = Coefficients { velocity: cfg.velocity, diffusivity: cfg.diffusivity };
        for (name, &value) in theta.names().iter().zip(theta.values()) {
            match name.as_str() {
                "v1" => c.velocity[0] = value,
                "v2" => c.velocity[1] = value,
                "d1" => c.diffusivity[0] = value,
                "d2" => c.diffusivity[1] = value,
                "d" => c.diffusivity = [value, value],
                other => return Err(Error::InvalidParameter(format!("unknown parameter `{other}`"))),
            }
        }
        Ok(c)
    }
}

/// Largest forward-Euler step that keeps the scheme monotone.
pub fn stability_bound(c: &Coefficients, cfg: &SolverConfig) -> f64 {
    let (hx, hy) = cfg.spacing();
    let rate = c.velocity[0].abs() / hx
        + c.velocity[1].abs() / hy
        + 2.0 * c.diffusivity[0] / (hx * hx)
        + 2.0 * c.diffusivity[1] / (hy * hy);
    1.0 / rate
}

/// Solves the advection-diffusion problem for one parameter point and returns
/// the `n x n_T` snapshot matrix at times `t_j = j * t_final / n_T`,
/// `j = 1..=n_T`.
pub fn simulate_advection_diffusion(theta: &ParameterPoint, cfg: &SolverConfig) -> Result<SnapshotMatrix> {
    cfg.validate()?;
    let coef = Coefficients::resolve(theta, cfg)?;
    let [d1, d2] = coef.diffusivity;
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::NonPositiveDiffusivity(d1, d2));
    }
    let bound = stability_bound(&coef, cfg);
    let interval = cfg.t_final / cfg.n_snapshots as f64;
    let substeps = match cfg.dt {
        Some(dt) => {
            if !(dt > 0.0) || dt > bound {
                return Err(Error::UnstableScheme { dt, bound });
            }
            (interval / dt - 1e-9).ceil().max(1.0) as usize
        }
        None => {
            let s = cfg.safety_factor;
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::UnstableScheme { dt: s * bound, bound });
            }
            (interval / (s * bound)).ceil().max(1.0) as usize
        }
    };
    let dt = interval / substeps as f64;

    let (nx, ny) = (cfg.nx, cfg.ny);
    let (hx, hy) = cfg.spacing();
    let mut u = initial_blob(cfg);
    let mut next = vec![0.0; u.len()];
    let kx = d1 / (hx * hx);
    let ky = d2 / (hy * hy);
    let [vx, vy] = coef.velocity;
    let ax = vx / hx;
    let ay = vy / hy;

    let mut data = DMatrix::zeros(nx * ny, cfg.n_snapshots);
    for snap in 0..cfg.n_snapshots {
        for _ in 0..substeps {
            for iy in 0..ny {
                for ix in 0..nx {
                    let k = iy * nx + ix;
                    let c = u[k];
                    // Zero-flux walls: a missing neighbour mirrors the centre.
                    let e = if ix + 1 < nx { u[k + 1] } else { c };
                    let w = if ix > 0 { u[k - 1] } else { c };
                    let n = if iy + 1 < ny { u[k + nx] } else { c };
                    let s = if iy > 0 { u[k - nx] } else { c };
                    let diff_x = kx * ((e - c) + (w - c));
                    let diff_y = ky * ((n - c) + (s - c));
                    let adv_x = if vx >= 0.0 { ax * (c - w) } else { ax * (e - c) };
                    let adv_y = if vy >= 0.0 { ay * (c - s) } else { ay * (n - c) };
                    next[k] = c + dt * ((diff_x + diff_y) - (adv_x + adv_y));
                }
            }
            std::mem::swap(&mut u, &mut next);
        }
        data.column_mut(snap).copy_from_slice(&u);
    }
    SnapshotMatrix::new(theta.clone(), data)
}

fn initial_blob(cfg: &SolverConfig) -> Vec<f64> {
    let (hx, hy) = cfg.spacing();
    let [cx, cy] = cfg.blob_center;
    let two_w2 = 2.0 * cfg.blob_width * cfg.blob_width;
    let mut u = Vec::with_capacity(cfg.n());
    for iy in 0..cfg.ny {
        let y = iy as f64 * hy;
        for ix in 0..cfg.nx {
            let x = ix as f64 * hx;
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            u.push(cfg.blob_amplitude * (-r2 / two_w2).exp());
        }
    }
    u
}

/// One axis of a Cartesian parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(name: &str, lo: f64, hi: f64, step: f64) -> Self {
        Self { name: name.to_string(), lo, hi, step }
    }

    /// Endpoint-inclusive arithmetic sequence `lo, lo + step, ..., <= hi`.
    pub fn values(&self) -> Vec<f64> {
        if !(self.hi >= self.lo) || !(self.step > 0.0) {
            return Vec::new();
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| snap_decimal(self.lo + i as f64 * self.step)).collect()
    }
}

/// Rounds to 12 decimals so that points of different grids over the same
/// interval compare equal (0.01 + 5 * 0.004 and 0.01 + 0.02 both land on 0.03).
fn snap_decimal(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Cartesian product of per-axis sequences, first axis outermost.
pub fn build_parameter_grid(axes: &[GridAxis]) -> Result<Vec<ParameterPoint>> {
    if axes.is_empty() {
        return Err(Error::InvalidParameter("parameter grid needs at least one axis".into()));
    }
    let mut per_axis = Vec::with_capacity(axes.len());
    for (i, axis) in axes.iter().enumerate() {
        if !(axis.step > 0.0) || !axis.lo.is_finite() || !axis.hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "axis `{}` needs finite bounds and a positive step",
                axis.name
            )));
        }
        let values = axis.values();
        if values.is_empty() {
            return Err(Error::EmptyGrid { axis: i });
        }
        per_axis.push(values);
    }
    let names: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    let mut points = vec![Vec::new()];
    for values in &per_axis {
        points = points
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    points.into_iter().map(|v| ParameterPoint::new(names.clone(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(names: &[&str], values: &[f64]) -> ParameterPoint {
        ParameterPoint::new(names.iter().copied(), values.to_vec()).unwrap()
    }

    fn small_cfg() -> SolverConfig {
        SolverConfig { nx: 21, ny: 21, n_snapshots: 10, ..SolverConfig::default() }
    }

    fn field(m: &SnapshotMatrix, col: usize, ix: usize, iy: usize, nx: usize) -> f64 {
        m.data[(iy * nx + ix, col)]
    }

    #[test]
    fn zero_diffusivity_is_rejected() {
        let theta = point(&["v1", "v2", "d1", "d2"], &[0.0, 0.0, 0.0, 0.0]);
        let err = simulate_advection_diffusion(&theta, &small_cfg()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDiffusivity(..)));
    }

    #[test]
    fn oversized_time_step_is_rejected() {
        let theta = point(&["d1", "d2"], &[0.05, 0.05]);
        let cfg = SolverConfig { dt: Some(1.0), ..small_cfg() };
        assert!(matches!(
            simulate_advection_diffusion(&theta, &cfg),
            Err(Error::UnstableScheme { .. })
        ));
        let cfg = SolverConfig { safety_factor: 1.5, ..small_cfg() };
        assert!(matches!(
            simulate_advection_diffusion(&theta, &cfg),
            Err(Error::UnstableScheme { .. })
        ));
    }

    #[test]
    fn unknown_parameter_names_are_rejected() {
        let theta = point(&["kappa"], &[0.1]);
        assert!(matches!(
            simulate_advection_diffusion(&theta, &small_cfg()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn pure_diffusion_from_centered_blob_keeps_the_grid_symmetries() {
        let cfg = SolverConfig { blob_center: [0.5, 0.5], ..small_cfg() };
        let theta = point(&["v1", "v2", "d1", "d2"], &[0.0, 0.0, 0.03, 0.03]);
        let m = simulate_advection_diffusion(&theta, &cfg).unwrap();
        let nx = cfg.nx;
        let mut worst: f64 = 0.0;
        for col in 0..m.n_t() {
            for iy in 0..nx {
                for ix in 0..nx {
                    let v = field(&m, col, ix, iy, nx);
                    worst = worst
                        .max((v - field(&m, col, iy, ix, nx)).abs())
                        .max((v - field(&m, col, nx - 1 - ix, iy, nx)).abs())
                        .max((v - field(&m, col, ix, nx - 1 - iy, nx)).abs());
                }
            }
        }
        assert!(worst <= 1e-10, "symmetry defect {worst:e}");
        // Zero-flux walls conserve mass; it may only drift by rounding.
        let sums: Vec<f64> = m.data.column_iter().map(|c| c.sum()).collect();
        for pair in sums.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10 * pair[0].abs(), "{pair:?}");
        }
    }

    #[test]
    fn advection_moves_the_centroid_right() {
        let theta = point(&["v1", "v2", "d1", "d2"], &[1.0, 0.0, 0.01, 0.01]);
        let cfg = SolverConfig::default();
        let m = simulate_advection_diffusion(&theta, &cfg).unwrap();
        let h = 1.0 / (cfg.nx - 1) as f64;
        let centroids: Vec<f64> = m
            .data
            .column_iter()
            .map(|c| {
                let mass: f64 = c.sum();
                let moment: f64 = c.iter().enumerate().map(|(k, v)| (k % cfg.nx) as f64 * h * v).sum();
                moment / mass
            })
            .collect();
        // Once the plume reaches the closed right wall diffusion pulls the
        // centroid back slightly, so only the transport phase is monotone.
        let half = centroids.len() / 2;
        for pair in centroids[..half].windows(2) {
            assert!(pair[1] > pair[0], "{pair:?}");
        }
        assert!(centroids[centroids.len() - 1] > centroids[0] + 0.2, "{centroids:?}");
    }

    #[test]
    fn stronger_diffusion_lowers_the_final_maximum() {
        let cfg = small_cfg();
        let peaks: Vec<f64> = [0.01, 0.03, 0.05]
            .iter()
            .map(|&d| {
                let m = simulate_advection_diffusion(&point(&["d1", "d2"], &[d, d]), &cfg).unwrap();
                m.data.column(m.n_t() - 1).max()
            })
            .collect();
        assert!(peaks[0] > peaks[1] && peaks[1] > peaks[2], "{peaks:?}");
    }

    #[test]
    fn paper_grids_have_the_expected_sizes() {
        let fine = [GridAxis::new("d1", 0.01, 0.05, 0.002), GridAxis::new("d2", 0.01, 0.05, 0.002)];
        assert_eq!(build_parameter_grid(&fine).unwrap().len(), 441);
        let coarse = [GridAxis::new("d1", 0.01, 0.05, 0.008), GridAxis::new("d2", 0.01, 0.05, 0.008)];
        let pts = build_parameter_grid(&coarse).unwrap();
        assert_eq!(pts.len(), 36);
        assert_eq!(pts[1].values(), &[0.01, 0.018]);
    }

    #[test]
    fn degenerate_and_empty_grids() {
        let single = [GridAxis::new("a", 0.0, 0.0, 1.0), GridAxis::new("b", 0.0, 0.0, 1.0)];
        let pts = build_parameter_grid(&single).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].values(), &[0.0, 0.0]);
        let inverted = [GridAxis::new("a", 1.0, 0.0, 0.1)];
        assert!(matches!(build_parameter_grid(&inverted), Err(Error::EmptyGrid { axis: 0 })));
    }

    #[test]
    fn coarse_grid_points_lie_exactly_on_the_fine_grid() {
        let fine = build_parameter_grid(&[GridAxis::new("d", 0.01, 0.05, 0.004)]).unwrap();
        let coarse = build_parameter_grid(&[GridAxis::new("d", 0.01, 0.05, 0.02)]).unwrap();
        for c in &coarse {
            assert!(fine.iter().any(|f| f == c), "{c}");
        }
    }

    #[test]
    fn parameter_point_validation() {
        assert!(ParameterPoint::new(["a"], vec![f64::NAN]).is_err());
        assert!(ParameterPoint::new(["a", "a"], vec![1.0, 2.0]).is_err());
        assert!(ParameterPoint::new(Vec::<String>::new(), vec![]).is_err());
        assert!(ParameterPoint::new(["a"], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn standardization_maps_the_training_box_to_the_unit_cube() {
        let pts = [point(&["a", "b"], &[0.01, 2.0]), point(&["a", "b"], &[0.05, 2.0]), point(&["a", "b"], &[0.03, 2.0])];
        let s = Standardization::fit(&pts).unwrap();
        let u = s.apply(&pts[2]).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-12);
        assert_eq!(u[1], 0.0);
        assert!(s.apply(&point(&["b", "a"], &[0.0, 0.0])).is_err());
    }
}
