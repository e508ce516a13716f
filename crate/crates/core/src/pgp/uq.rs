//! Sampling-based uncertainty of a predicted subspace.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::model::{shrink_to_injectivity, PgpModel, PredictiveDistribution};
use crate::error::{Error, Result};
use crate::grassmann::{exp_map, geodesic_distance, SubspacePoint, TangentCoordinates};

#[derive(Clone, Debug)]
pub struct SubspaceSample {
    pub subspace: SubspacePoint,
    /// Whether the drawn coordinates were pulled back onto the `pi/2` sphere.
    pub shrunk: bool,
}

/// Draws `count` subspaces from the projected predictive distribution.
///
/// Coordinates are `u* + sqrt(c*) sigma_K eps` with `eps` standard normal,
/// all drawn in order from one ChaCha8 stream seeded with `seed`.
pub fn sample_subspaces(
    dist: &PredictiveDistribution,
    model: &PgpModel,
    count: usize,
    seed: u64,
) -> Result<Vec<SubspaceSample>> {
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let scale = dist.variance_scale.max(0.0).sqrt() * model.sigma_k();
    let u = &dist.mean_coords.0;
    if u.len() != model.frame().dim() {
        return Err(Error::DimensionMismatch(format!(
            "predictive mean has length {}, model expects {}",
            u.len(),
            model.frame().dim()
        )));
    }
    if scale == 0.0 {
        let s = SubspaceSample { subspace: dist.map_subspace.clone(), shrunk: false };
        return Ok(vec![s; count]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<DVector<f64>> = (0..count)
        .map(|_| u + DVector::from_fn(u.len(), |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    draws
        .into_par_iter()
        .map(|mut y| {
            let shrunk = shrink_to_injectivity(&mut y);
            let lift = model.frame().to_lift(&TangentCoordinates(y))?;
            Ok(SubspaceSample { subspace: exp_map(model.basepoint(), &lift)?, shrunk })
        })
        .collect()
}

/// Sample standard deviation (denominator `count - 1`) of the geodesic
/// distances between drawn subspaces and the MAP subspace.
pub fn uncertainty_stddev(dist: &PredictiveDistribution, model: &PgpModel, count: usize, seed: u64) -> Result<f64> {
    if count < 2 {
        return Err(Error::InvalidConfig("uncertainty needs at least two samples".into()));
    }
    let samples = sample_subspaces(dist, model, count, seed)?;
    let zeta = samples
        .iter()
        .map(|s| geodesic_distance(&s.subspace, &dist.map_subspace))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_stddev(&zeta))
}

fn sample_stddev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::ParameterPoint;
    use crate::pgp::KernelSpec;
    use crate::testutil::{random_horizontal, random_stiefel};

    fn theta(v: f64) -> ParameterPoint {
        ParameterPoint::new(["d"], vec![v]).unwrap()
    }

    fn model(seed: u64) -> PgpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_stiefel(&mut rng, 12, 2);
        let train: Vec<_> = [0.0, 0.5, 1.0]
            .iter()
            .map(|t| (theta(*t), exp_map(&mu, &random_horizontal(&mut rng, &mu, 0.4)).unwrap()))
            .collect();
        PgpModel::from_subspaces(&train, mu, KernelSpec::ard(0.0, 1.0, vec![0.3])).unwrap()
    }

    #[test]
    fn zero_variance_returns_the_map_subspace() {
        let m = model(1);
        let dist = m.predict(&theta(0.5)).unwrap();
        let dist = PredictiveDistribution { variance_scale: 0.0, ..dist };
        for s in sample_subspaces(&dist, &m, 5, 3).unwrap() {
            assert!(geodesic_distance(&s.subspace, &dist.map_subspace).unwrap() < 1e-12);
        }
        assert!(uncertainty_stddev(&dist, &m, 2, 3).unwrap() < 1e-12);
    }

    #[test]
    fn training_points_carry_no_uncertainty() {
        let m = model(2);
        let dist = m.predict(&theta(1.0)).unwrap();
        assert!(uncertainty_stddev(&dist, &m, 50, 1).unwrap() < 1e-6);
    }

    #[test]
    fn samples_are_seed_deterministic() {
        let m = model(3);
        let dist = m.predict(&theta(0.3)).unwrap();
        let a = sample_subspaces(&dist, &m, 20, 42).unwrap();
        let b = sample_subspaces(&dist, &m, 20, 42).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.subspace.basis(), y.subspace.basis());
        }
    }

    #[test]
    fn spread_grows_with_the_variance_scale() {
        let m = model(4);
        let base = m.predict(&theta(0.25)).unwrap();
        let mut last = 0.0;
        for c in [0.01, 0.05, 0.2] {
            let dist = PredictiveDistribution { variance_scale: c, ..base.clone() };
            let samples = sample_subspaces(&dist, &m, 1000, 7).unwrap();
            let mean: f64 = samples
                .iter()
                .map(|s| geodesic_distance(&s.subspace, &dist.map_subspace).unwrap())
                .sum::<f64>()
                / 1000.0;
            assert!(mean > last, "c*={c}: {mean} <= {last}");
            last = mean;
        }
    }

    #[test]
    fn stddev_of_a_known_sample() {
        assert!((sample_stddev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
