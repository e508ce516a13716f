//! Kernel hyperparameters by regularized maximum likelihood.
//!
//! With `K = sigma_K^2 I` the stacked coordinates have log-likelihood
//! `-(m/2) log det Omega - (mk/2) log sigma_K^2 - tr(Omega^{-1} G) / (2 sigma_K^2)`
//! up to a constant, where `G = Y Y^T` is the `k x k` Gram matrix of the
//! coordinates. `sigma_K^2` is profiled out as `tr(Omega^{-1} G) / (mk)`, so
//! every evaluation costs one `k x k` Cholesky factorization.
//!
//! The overall scale of `Omega` is absorbed by `sigma_K`: the ARD signal
//! amplitude and the exponential amplitude are held at 1 and the search runs
//! over the nugget and the length-scales only.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use rayon::prelude::*;

use super::kernel::KernelSpec;
use super::model::{profiled_sigma, KernelFactor, PgpModel, SIGMA_FLOOR};
use crate::error::{Error, Result};

const NUGGET_BOUNDS: (f64, f64) = (1e-6, 1e3);
const LENGTH_BOUNDS: (f64, f64) = (1e-3, 1e3);
const NUGGET_STARTS: (f64, f64) = (1e-3, 1e1);
const LENGTH_STARTS: (f64, f64) = (1e-2, 1e1);
/// Cost assigned where `Omega` cannot be factorized.
const INFEASIBLE: f64 = 1e300;
const OUT_OF_BOX_PENALTY: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: u64,
    /// Extra start, typically the optimum at a neighbouring `gamma`.
    pub warm_start: Option<KernelSpec>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 8, max_iters: 600, warm_start: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub kernel: KernelSpec,
    pub sigma_k: f64,
    /// Profiled log marginal likelihood at the optimum.
    pub log_likelihood: f64,
    /// `log_likelihood - gamma * sum_g l_g^{-2}`.
    pub objective: f64,
}

/// Training data as seen by the likelihood.
#[derive(Clone, Debug)]
pub struct LikelihoodData {
    pub points: Vec<Vec<f64>>,
    pub gram: DMatrix<f64>,
    /// Coordinate dimension `nr - r`.
    pub m: usize,
}

impl LikelihoodData {
    pub fn from_model(model: &PgpModel) -> Self {
        let y = model.coords();
        Self { points: model.standardized_points().to_vec(), gram: y * y.transpose(), m: y.ncols() }
    }
}

/// Profiled log marginal likelihood and the matching `sigma_K`.
pub fn log_marginal_likelihood(data: &LikelihoodData, kernel: &KernelSpec) -> Result<(f64, f64)> {
    let factor = KernelFactor::new(kernel, &data.points)?;
    Ok(profiled(&factor, data))
}

fn profiled(factor: &KernelFactor, data: &LikelihoodData) -> (f64, f64) {
    let mk = (data.m * data.points.len()) as f64;
    let sigma = profiled_sigma(factor, &data.gram, data.m);
    let lml = -0.5 * data.m as f64 * factor.log_det()
        - 0.5 * mk * (sigma * sigma).ln()
        - 0.5 * mk * (1.0 + (2.0 * std::f64::consts::PI).ln());
    (lml, sigma)
}

fn penalty(kernel: &KernelSpec, gamma: f64) -> f64 {
    gamma * kernel.length_scales().iter().map(|l| l.powi(-2)).sum::<f64>()
}

/// Free parameters in log space and the box they live in.
#[derive(Clone, Debug)]
struct Parameterization {
    template: KernelSpec,
    bounds: Vec<(f64, f64)>,
    starts: Vec<(f64, f64)>,
}

impl Parameterization {
    fn new(template: &KernelSpec) -> Self {
        let ln = |(a, b): (f64, f64)| (f64::ln(a), f64::ln(b));
        let n_len = template.length_scales().len();
        let (mut bounds, mut starts) = (Vec::new(), Vec::new());
        if matches!(template, KernelSpec::ArdSquaredExponential { .. }) {
            bounds.push(ln(NUGGET_BOUNDS));
            starts.push(ln(NUGGET_STARTS));
        }
        bounds.extend(std::iter::repeat_n(ln(LENGTH_BOUNDS), n_len));
        starts.extend(std::iter::repeat_n(ln(LENGTH_STARTS), n_len));
        Self { template: template.clone(), bounds, starts }
    }

    fn kernel(&self, p: &[f64]) -> KernelSpec {
        match &self.template {
            KernelSpec::ArdSquaredExponential { groups, .. } => KernelSpec::ArdSquaredExponential {
                nugget: p[0].exp(),
                signal: 1.0,
                length_scales: p[1..].iter().map(|v| v.exp()).collect(),
                groups: groups.clone(),
            },
            KernelSpec::Exponential { .. } => KernelSpec::Exponential { amplitude: 1.0, length_scale: p[0].exp() },
        }
    }

    fn encode(&self, kernel: &KernelSpec) -> Option<Vec<f64>> {
        let p = match (kernel, &self.template) {
            (KernelSpec::ArdSquaredExponential { nugget, signal, length_scales, .. }, KernelSpec::ArdSquaredExponential { .. }) => {
                if *signal <= 0.0 {
                    return None;
                }
                // Rescale to unit signal, which sigma_K absorbs.
                std::iter::once(nugget / signal).chain(length_scales.iter().copied()).map(f64::ln).collect()
            }
            (KernelSpec::Exponential { length_scale, .. }, KernelSpec::Exponential { .. }) => vec![length_scale.ln()],
            _ => return None,
        };
        (p.len() == self.bounds.len() && p.iter().all(|v| v.is_finite())).then(|| self.clamp(&p).0)
    }

    fn clamp(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mut excess = 0.0;
        let q = p
            .iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| {
                let c = v.clamp(*lo, *hi);
                excess += (v - c) * (v - c);
                c
            })
            .collect();
        (q, excess)
    }

    /// The `i`-th point (from 1) of a Halton sequence, mapped into the start box.
    fn halton_start(&self, i: usize) -> Vec<f64> {
        const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
        self.starts
            .iter()
            .enumerate()
            .map(|(d, (lo, hi))| lo + (hi - lo) * radical_inverse(i, PRIMES[d % PRIMES.len()]))
            .collect()
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut out = 0.0;
    while i > 0 {
        f /= base as f64;
        out += f * (i % base) as f64;
        i /= base;
    }
    out
}

struct Objective<'a> {
    data: &'a LikelihoodData,
    param: &'a Parameterization,
    gamma: f64,
}

impl Objective<'_> {
    /// Negative regularized likelihood on the clamped point, plus a quadratic
    /// penalty for leaving the box.
    fn eval(&self, p: &[f64]) -> f64 {
        let (q, excess) = self.param.clamp(p);
        let kernel = self.param.kernel(&q);
        let base = match KernelFactor::new(&kernel, &self.data.points) {
            Ok(f) => {
                let (lml, _) = profiled(&f, self.data);
                if lml.is_finite() {
                    -(lml - penalty(&kernel, self.gamma))
                } else {
                    INFEASIBLE
                }
            }
            Err(_) => INFEASIBLE,
        };
        base + OUT_OF_BOX_PENALTY * excess
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

fn local_search(obj: &Objective<'_>, start: Vec<f64>, max_iters: u64) -> Option<(Vec<f64>, f64)> {
    let mut simplex = vec![start.clone()];
    for d in 0..start.len() {
        let mut v = start.clone();
        let (lo, hi) = obj.param.bounds[d];
        v[d] = if v[d] + 0.7 <= hi { v[d] + 0.7 } else { (v[d] - 0.7).max(lo) };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).ok()?;
    let res = Executor::new(Objective { data: obj.data, param: obj.param, gamma: obj.gamma }, solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .ok()?;
    let state = res.state();
    let best = state.get_best_param().cloned()?;
    let (q, _) = obj.param.clamp(&best);
    let value = obj.eval(&q);
    (value < INFEASIBLE).then_some((q, value))
}

/// Maximizes the profiled likelihood minus `gamma * sum_g l_g^{-2}`.
///
/// `template` fixes the kernel family and the group map; its values are
/// ignored except through `opts.warm_start`.
pub fn fit_hyperparameters(model: &PgpModel, template: &KernelSpec, gamma: f64, opts: &FitOptions) -> Result<FitResult> {
    fit_on(&LikelihoodData::from_model(model), template, gamma, opts)
}

pub fn fit_on(data: &LikelihoodData, template: &KernelSpec, gamma: f64, opts: &FitOptions) -> Result<FitResult> {
    if data.points.len() < 2 {
        return Err(Error::InvalidConfig("hyperparameter fitting needs at least two training points".into()));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("regularization weight must be non-negative, got {gamma}")));
    }
    template.validate(data.points[0].len())?;
    if data.gram.trace() <= 0.0 {
        // All coordinates vanish; any kernel explains them equally well.
        let objective = -penalty(template, gamma);
        return Ok(FitResult { kernel: template.clone(), sigma_k: SIGMA_FLOOR, log_likelihood: 0.0, objective });
    }
    let param = Parameterization::new(template);
    let obj = Objective { data, param: &param, gamma };
    let mut starts: Vec<Vec<f64>> = (1..=opts.restarts.max(1)).map(|i| param.halton_start(i)).collect();
    if let Some(w) = opts.warm_start.as_ref().and_then(|k| param.encode(k)) {
        starts.insert(0, w);
    }
    let results: Vec<Option<(Vec<f64>, f64)>> =
        starts.into_par_iter().map(|s| local_search(&obj, s, opts.max_iters)).collect();
    let best = results
        .into_iter()
        .flatten()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::OptimizationFailed("no start produced a positive-definite kernel".into()))?;
    let kernel = param.kernel(&best.0);
    let (log_likelihood, sigma_k) = log_marginal_likelihood(data, &kernel)?;
    Ok(FitResult { objective: log_likelihood - penalty(&kernel, gamma), kernel, sigma_k, log_likelihood })
}

/// Fits every `gamma` in order, warm-starting each from the previous optimum.
pub fn gamma_sweep(model: &PgpModel, template: &KernelSpec, gammas: &[f64], opts: &FitOptions) -> Result<Vec<FitResult>> {
    let data = LikelihoodData::from_model(model);
    let mut out: Vec<FitResult> = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let warm_start = out.last().map(|f| f.kernel.clone()).or_else(|| opts.warm_start.clone());
        out.push(fit_on(&data, template, gamma, &FitOptions { warm_start, ..opts.clone() })?);
    }
    Ok(out)
}
