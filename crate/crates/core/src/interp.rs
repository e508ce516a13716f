//! Interpolation of POD bases in the tangent space of a basepoint.
//!
//! Every training subspace is mapped to a lift `Z_i = Log_{Phi0}(Phi_i)`, the
//! lifts are combined with scalar weights `w_i(theta*)` and the combination is
//! mapped back with `Exp_{Phi0}`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{exp_map, geodesic_distance, log_map, HorizontalLift, SubspacePoint};
use crate::linalg;
use crate::pde::{ParameterPoint, Standardization};
use crate::pod::StiefelBasis;

/// Singular values of the interpolated lift are capped here when they
/// exceed `pi/2`.
pub const SHRINK_TARGET: f64 = FRAC_PI_2 - 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InterpolationScheme {
    /// Lagrange polynomial weights; one-dimensional parameters only.
    Lagrange,
    /// Normalized Gaussian weights `exp(-|theta* - theta_i|^2 / (2 h^2))` on
    /// standardized parameters. Without a bandwidth, `h` is the mean
    /// nearest-neighbour distance of the training points.
    GaussianRbf { bandwidth: Option<f64> },
}

impl Default for InterpolationScheme {
    fn default() -> Self {
        InterpolationScheme::GaussianRbf { bandwidth: None }
    }
}

/// Where the tangent space is attached.
#[derive(Clone, Debug, Default)]
pub enum InterpBasepoint {
    /// The training subspace with index `i`.
    Training(usize),
    /// The training subspace minimizing the summed squared distance to the others.
    #[default]
    Medoid,
    Explicit(StiefelBasis),
}

#[derive(Clone, Debug, Default)]
pub struct InterpolationConfig {
    pub scheme: InterpolationScheme,
    pub basepoint: InterpBasepoint,
}

/// Raised when the interpolated lift leaves the injectivity radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstabilityWarning {
    pub largest_singular_value: f64,
}

#[derive(Clone, Debug)]
pub struct Interpolated {
    pub subspace: SubspacePoint,
    pub warning: Option<InstabilityWarning>,
}

#[derive(Clone, Debug)]
pub struct GrassmannInterpolator {
    scheme: InterpolationScheme,
    basepoint: StiefelBasis,
    thetas: Vec<ParameterPoint>,
    standardized: Vec<Vec<f64>>,
    standardization: Standardization,
    bandwidth: f64,
    lifts: Vec<HorizontalLift>,
}

impl GrassmannInterpolator {
    pub fn fit(train: &[(ParameterPoint, SubspacePoint)], cfg: &InterpolationConfig) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::InvalidConfig("interpolation needs at least two training points".into()));
        }
        let thetas: Vec<ParameterPoint> = train.iter().map(|(t, _)| t.clone()).collect();
        let standardization = Standardization::fit(&thetas)?;
        let standardized = thetas.iter().map(|t| standardization.apply(t)).collect::<Result<Vec<_>>>()?;
        for (i, a) in standardized.iter().enumerate() {
            if standardized[..i].iter().any(|b| b == a) {
                return Err(Error::InvalidConfig(format!("duplicate training parameter {}", thetas[i])));
            }
        }
        let bandwidth = match &cfg.scheme {
            InterpolationScheme::Lagrange => {
                if thetas[0].dim() != 1 {
                    return Err(Error::InvalidConfig("Lagrange interpolation needs one-dimensional parameters".into()));
                }
                f64::NAN
            }
            InterpolationScheme::GaussianRbf { bandwidth: Some(h) } => {
                if !(*h > 0.0 && h.is_finite()) {
                    return Err(Error::InvalidConfig(format!("RBF bandwidth must be positive, got {h}")));
                }
                *h
            }
            InterpolationScheme::GaussianRbf { bandwidth: None } => mean_nearest_neighbour(&standardized),
        };
        let basepoint = match &cfg.basepoint {
            InterpBasepoint::Training(i) => train
                .get(*i)
                .ok_or_else(|| Error::InvalidConfig(format!("basepoint index {i} out of range")))?
                .1
                .basis()
                .clone(),
            InterpBasepoint::Medoid => train[medoid(train)?].1.basis().clone(),
            InterpBasepoint::Explicit(b) => b.clone(),
        };
        let lifts = train.iter().map(|(_, s)| log_map(&basepoint, s.basis())).collect::<Result<Vec<_>>>()?;
        Ok(Self { scheme: cfg.scheme.clone(), basepoint, thetas, standardized, standardization, bandwidth, lifts })
    }

    pub fn basepoint(&self) -> &StiefelBasis {
        &self.basepoint
    }

    /// Effective RBF bandwidth on standardized parameters (NaN for Lagrange).
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn weights(&self, theta: &ParameterPoint) -> Result<Vec<f64>> {
        match self.scheme {
            InterpolationScheme::Lagrange => {
                let x = theta.values();
                if theta.names() != self.thetas[0].names() {
                    return Err(Error::DimensionMismatch(format!(
                        "expected parameters {:?}, got {:?}",
                        self.thetas[0].names(),
                        theta.names()
                    )));
                }
                let nodes: Vec<f64> = self.thetas.iter().map(|t| t.values()[0]).collect();
                Ok(lagrange_weights(&nodes, x[0]))
            }
            InterpolationScheme::GaussianRbf { .. } => {
                let u = self.standardization.apply(theta)?;
                let h2 = self.bandwidth * self.bandwidth;
                let logits: Vec<f64> = self.standardized.iter().map(|s| -squared_distance(s, &u) / (2.0 * h2)).collect();
                let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = w.iter().sum();
                Ok(w.into_iter().map(|v| v / total).collect())
            }
        }
    }

    pub fn predict(&self, theta: &ParameterPoint) -> Result<Interpolated> {
        let w = self.weights(theta)?;
        let mut z = DMatrix::zeros(self.basepoint.n(), self.basepoint.r());
        for (wi, lift) in w.iter().zip(&self.lifts) {
            z += lift.matrix() * *wi;
        }
        let (u, mut sigma, vt) = linalg::thin_svd(&z);
        let largest = sigma.max();
        let warning = if largest > FRAC_PI_2 {
            sigma.apply(|s| *s = s.min(SHRINK_TARGET));
            z = &u * DMatrix::from_diagonal(&sigma) * &vt;
            Some(InstabilityWarning { largest_singular_value: largest })
        } else {
            None
        };
        let subspace = exp_map(&self.basepoint, &HorizontalLift(z))?;
        Ok(Interpolated { subspace, warning })
    }
}

/// One-shot form of [`GrassmannInterpolator`].
pub fn interpolate_basis(
    train: &[(ParameterPoint, SubspacePoint)],
    theta: &ParameterPoint,
    cfg: &InterpolationConfig,
) -> Result<Interpolated> {
    GrassmannInterpolator::fit(train, cfg)?.predict(theta)
}

fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, xj)| (x - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_nearest_neighbour(points: &[Vec<f64>]) -> f64 {
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, a)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| squared_distance(a, b))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    total / points.len() as f64
}

fn medoid(train: &[(ParameterPoint, SubspacePoint)]) -> Result<usize> {
    let k = train.len();
    let mut cost = vec![0.0; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = geodesic_distance(&train[i].1, &train[j].1)?;
            cost[i] += d * d;
            cost[j] += d * d;
        }
    }
    Ok((0..k).min_by(|a, b| cost[*a].total_cmp(&cost[*b])).expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_horizontal, random_stiefel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(t: f64) -> SubspacePoint {
        SubspacePoint::from_matrix(&DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()])).unwrap()
    }

    fn theta(v: f64) -> ParameterPoint {
        ParameterPoint::new(["d"], vec![v]).unwrap()
    }

    fn lagrange(basepoint: InterpBasepoint) -> InterpolationConfig {
        InterpolationConfig { scheme: InterpolationScheme::Lagrange, basepoint }
    }

    #[test]
    fn lagrange_midpoint_on_the_circle() {
        let train = vec![(theta(0.0), line(0.0)), (theta(1.0), line(0.4))];
        let out = interpolate_basis(&train, &theta(0.5), &lagrange(InterpBasepoint::Training(0))).unwrap();
        assert!(out.warning.is_none());
        assert!(geodesic_distance(&out.subspace, &line(0.2)).unwrap() < 1e-8);
    }

    #[test]
    fn lagrange_reproduces_training_subspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi0 = random_stiefel(&mut rng, 12, 3);
        let train: Vec<_> = (0..5)
            .map(|i| {
                let s = exp_map(&phi0, &random_horizontal(&mut rng, &phi0, 0.5)).unwrap();
                (theta(i as f64 * 0.3), s)
            })
            .collect();
        for basepoint in [InterpBasepoint::Medoid, InterpBasepoint::Training(4), InterpBasepoint::Explicit(phi0)] {
            let interp = GrassmannInterpolator::fit(&train, &lagrange(basepoint)).unwrap();
            for (t, s) in &train {
                let out = interp.predict(t).unwrap();
                assert!(geodesic_distance(&out.subspace, s).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn extrapolating_far_out_raises_the_instability_warning() {
        let train = vec![(theta(0.0), line(0.0)), (theta(1.0), line(1.4))];
        let out = interpolate_basis(&train, &theta(1.5), &lagrange(InterpBasepoint::Training(0))).unwrap();
        let w = out.warning.expect("warning");
        assert!((w.largest_singular_value - 2.1).abs() < 1e-8);
        assert!((geodesic_distance(&out.subspace, &line(0.0)).unwrap() - SHRINK_TARGET).abs() < 1e-8);
    }

    #[test]
    fn rbf_weights_are_convex_and_lifts_do_not_grow() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi0 = random_stiefel(&mut rng, 10, 2);
        let mut train = Vec::new();
        for a in [0.0, 0.5, 1.0] {
            for b in [0.0, 0.5, 1.0] {
                let s = exp_map(&phi0, &random_horizontal(&mut rng, &phi0, 0.6)).unwrap();
                train.push((ParameterPoint::new(["a", "b"], vec![a, b]).unwrap(), s));
            }
        }
        let cfg = InterpolationConfig { scheme: InterpolationScheme::default(), basepoint: InterpBasepoint::Explicit(phi0) };
        let interp = GrassmannInterpolator::fit(&train, &cfg).unwrap();
        assert!((interp.bandwidth() - 0.5).abs() < 1e-12);
        let max_lift = interp.lifts.iter().map(HorizontalLift::norm).fold(0.0, f64::max);
        for q in [[0.2, 0.9], [0.5, 0.5], [3.0, -1.0]] {
            let w = interp.weights(&ParameterPoint::new(["a", "b"], q.to_vec()).unwrap()).unwrap();
            assert!(w.iter().all(|v| *v >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let z = w.iter().zip(&interp.lifts).fold(DMatrix::zeros(10, 2), |acc, (wi, l)| acc + l.matrix() * *wi);
            assert!(z.norm() <= max_lift + 1e-12);
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let two_d = vec![
            (ParameterPoint::new(["a", "b"], vec![0.0, 0.0]).unwrap(), line(0.0)),
            (ParameterPoint::new(["a", "b"], vec![1.0, 0.0]).unwrap(), line(0.1)),
        ];
        assert!(GrassmannInterpolator::fit(&two_d, &lagrange(InterpBasepoint::Medoid)).is_err());
        let dup = vec![(theta(0.0), line(0.0)), (theta(0.0), line(0.1))];
        assert!(GrassmannInterpolator::fit(&dup, &lagrange(InterpBasepoint::Medoid)).is_err());
        let one = vec![(theta(0.0), line(0.0))];
        assert!(GrassmannInterpolator::fit(&one, &InterpolationConfig::default()).is_err());
        let cfg = InterpolationConfig {
            scheme: InterpolationScheme::GaussianRbf { bandwidth: Some(0.0) },
            basepoint: InterpBasepoint::Medoid,
        };
        let ok = vec![(theta(0.0), line(0.0)), (theta(1.0), line(0.2))];
        assert!(GrassmannInterpolator::fit(&ok, &cfg).is_err());
    }

    #[test]
    fn scheme_config_uses_kebab_case_tags() {
        let s: InterpolationScheme = serde_json::from_str(r#"{"scheme":"gaussian-rbf","bandwidth":0.3}"#).unwrap();
        assert_eq!(s, InterpolationScheme::GaussianRbf { bandwidth: Some(0.3) });
        let s: InterpolationScheme = serde_json::from_str(r#"{"scheme":"lagrange"}"#).unwrap();
        assert_eq!(s, InterpolationScheme::Lagrange);
    }
}
