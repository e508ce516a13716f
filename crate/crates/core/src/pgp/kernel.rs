//! Covariance kernels on standardized parameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `nugget^2 [x = x'] + signal^2 exp(-1/2 sum_c (x_c - x'_c)^2 / l_{g(c)}^2)`.
    ArdSquaredExponential {
        nugget: f64,
        signal: f64,
        length_scales: Vec<f64>,
        /// Group of every parameter component; component `c` uses
        /// `length_scales[groups[c]]`. May be omitted when serialized;
        /// [`KernelSpec::with_default_groups`] then fills the identity map.
        #[serde(default)]
        groups: Vec<usize>,
    },
    /// `amplitude exp(-|x - x'| / length_scale)`.
    Exponential { amplitude: f64, length_scale: f64 },
}

impl KernelSpec {
    /// ARD kernel with one length-scale per component.
    pub fn ard(nugget: f64, signal: f64, length_scales: Vec<f64>) -> Self {
        let groups = (0..length_scales.len()).collect();
        KernelSpec::ArdSquaredExponential { nugget, signal, length_scales, groups }
    }

    /// ARD kernel with the given group map.
    pub fn ard_grouped(nugget: f64, signal: f64, length_scales: Vec<f64>, groups: Vec<usize>) -> Self {
        KernelSpec::ArdSquaredExponential { nugget, signal, length_scales, groups }
    }

    /// Replaces an empty group map by one group per length-scale.
    pub fn with_default_groups(self) -> Self {
        match self {
            KernelSpec::ArdSquaredExponential { nugget, signal, length_scales, groups } if groups.is_empty() => {
                KernelSpec::ard(nugget, signal, length_scales)
            }
            other => other,
        }
    }

    pub fn exponential(amplitude: f64, length_scale: f64) -> Self {
        KernelSpec::Exponential { amplitude, length_scale }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            KernelSpec::ArdSquaredExponential { nugget, signal, length_scales, groups } => {
                if !(*nugget >= 0.0 && nugget.is_finite() && *signal >= 0.0 && signal.is_finite()) {
                    return bad(format!("kernel amplitudes must be finite and non-negative, got {nugget}, {signal}"));
                }
                if length_scales.is_empty() || length_scales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return bad(format!("length-scales must be positive, got {length_scales:?}"));
                }
                if groups.len() != dim {
                    return bad(format!("group map has {} entries for {dim} parameters", groups.len()));
                }
                if let Some(g) = groups.iter().find(|g| **g >= length_scales.len()) {
                    return bad(format!("group {g} has no length-scale"));
                }
            }
            KernelSpec::Exponential { amplitude, length_scale } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return bad(format!("kernel amplitude must be non-negative, got {amplitude}"));
                }
                if !(*length_scale > 0.0 && length_scale.is_finite()) {
                    return bad(format!("length-scale must be positive, got {length_scale}"));
                }
            }
        }
        Ok(())
    }

    pub fn length_scales(&self) -> Vec<f64> {
        match self {
            KernelSpec::ArdSquaredExponential { length_scales, .. } => length_scales.clone(),
            KernelSpec::Exponential { length_scale, .. } => vec![*length_scale],
        }
    }

    /// `k(x, x)`.
    pub fn prior_variance(&self) -> f64 {
        match self {
            KernelSpec::ArdSquaredExponential { nugget, signal, .. } => nugget * nugget + signal * signal,
            KernelSpec::Exponential { amplitude, .. } => *amplitude,
        }
    }

    /// Kernel value between two standardized points. The nugget applies
    /// whenever the points coincide exactly.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::ArdSquaredExponential { nugget, signal, length_scales, groups } => {
                let q: f64 = a
                    .iter()
                    .zip(b)
                    .zip(groups)
                    .map(|((x, y), g)| {
                        let t = (x - y) / length_scales[*g];
                        t * t
                    })
                    .sum();
                let delta = if a == b { nugget * nugget } else { 0.0 };
                delta + signal * signal * (-0.5 * q).exp()
            }
            KernelSpec::Exponential { amplitude, length_scale } => {
                let dist: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                amplitude * (-dist / length_scale).exp()
            }
        }
    }

    pub fn matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let k = points.len();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = self.eval(&points[i], &points[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn cross(&self, points: &[Vec<f64>], x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(points.len(), points.iter().map(|p| self.eval(p, x)))
    }
}

/// Evaluates the kernel on two standardized points.
pub fn kernel_eval(kernel: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    kernel.eval(a, b)
}
