//! Per-point scoring of several methods on a held-out set, pairwise win
//! counts and leave-one-out cross-validation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{error_angle, error_frobenius, error_infinity, relative_from};
use crate::error::{Error, Result};
use crate::interp::{GrassmannInterpolator, InterpBasepoint, InterpolationConfig, InterpolationScheme};
use crate::pde::{ParameterPoint, SnapshotMatrix};
use crate::pgp::{fit_hyperparameters, BasepointChoice, FitOptions, KernelSpec, PgpModel, TrainingBases};
use crate::pod::{compute_pod_with, PodOptions, StiefelBasis};

/// Metric differences at or below this are ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "e_F")]
    Frobenius,
    #[serde(rename = "e_R")]
    Relative,
    #[serde(rename = "e_A")]
    Angle,
    #[serde(rename = "e_I")]
    Infinity,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Frobenius, Metric::Relative, Metric::Angle, Metric::Infinity];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Frobenius => "e_F",
            Metric::Relative => "e_R",
            Metric::Angle => "e_A",
            Metric::Infinity => "e_I",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub enum InterpBasepointChoice {
    #[default]
    Medoid,
    GlobalPod,
    Training(usize),
}

#[derive(Clone, Debug)]
pub enum MethodSpec {
    /// pGP with a fixed kernel, or refit with regularization `gamma` when
    /// `fit` is set.
    Pgp { kernel: KernelSpec, basepoint: BasepointChoice, fit: Option<(f64, FitOptions)> },
    Interp { scheme: InterpolationScheme, basepoint: InterpBasepointChoice },
    GlobalPod,
    /// The optimal POD of each test matrix itself.
    Oracle,
}

#[derive(Clone, Debug)]
pub struct Method {
    pub name: String,
    pub spec: MethodSpec,
}

impl Method {
    pub fn new(name: impl Into<String>, spec: MethodSpec) -> Self {
        Self { name: name.into(), spec }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointRecord {
    pub theta: ParameterPoint,
    pub method: String,
    pub e_f: f64,
    /// `None` where the optimal error vanishes.
    pub e_r: Option<f64>,
    pub e_a: f64,
    pub e_i: f64,
    pub shrunk: bool,
    pub instability: bool,
}

impl PointRecord {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Frobenius => Some(self.e_f),
            Metric::Relative => self.e_r,
            Metric::Angle => Some(self.e_a),
            Metric::Infinity => Some(self.e_i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub means: BTreeMap<Metric, Option<f64>>,
    pub medians: BTreeMap<Metric, Option<f64>>,
    pub shrunk: usize,
    pub instability: usize,
    pub relative_not_applicable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseWins {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: usize,
    pub methods: Vec<MethodSummary>,
    pub wins: Vec<PairwiseWins>,
}

/// Records grouped by test point: `records[p][m]` is method `m` at point `p`.
#[derive(Clone, Debug)]
pub struct MetricReport {
    pub methods: Vec<String>,
    pub records: Vec<Vec<PointRecord>>,
}

impl MetricReport {
    pub fn points(&self) -> usize {
        self.records.len()
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == name)
    }

    /// Wins of `a` over `b` on `metric`; lower is better.
    pub fn wins(&self, a: &str, b: &str, metric: Metric) -> Option<PairwiseWins> {
        let (ia, ib) = (self.method_index(a)?, self.method_index(b)?);
        let (mut a_wins, mut b_wins, mut ties) = (0, 0, 0);
        for row in &self.records {
            match (row[ia].get(metric), row[ib].get(metric)) {
                (Some(x), Some(y)) if (x - y).abs() > TIE_TOL => {
                    if x < y {
                        a_wins += 1
                    } else {
                        b_wins += 1
                    }
                }
                _ => ties += 1,
            }
        }
        Some(PairwiseWins { a: a.into(), b: b.into(), metric, a_wins, b_wins, ties })
    }

    pub fn summary(&self) -> Summary {
        let methods = self
            .methods
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let column: Vec<&PointRecord> = self.records.iter().map(|row| &row[i]).collect();
                let mut means = BTreeMap::new();
                let mut medians = BTreeMap::new();
                for m in Metric::ALL {
                    let mut v: Vec<f64> = column.iter().filter_map(|r| r.get(m)).collect();
                    means.insert(m, (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64));
                    v.sort_by(f64::total_cmp);
                    medians.insert(m, median(&v));
                }
                MethodSummary {
                    method: name.clone(),
                    means,
                    medians,
                    shrunk: column.iter().filter(|r| r.shrunk).count(),
                    instability: column.iter().filter(|r| r.instability).count(),
                    relative_not_applicable: column.iter().filter(|r| r.e_r.is_none()).count(),
                }
            })
            .collect();
        let mut wins = Vec::new();
        for (i, a) in self.methods.iter().enumerate() {
            for b in &self.methods[i + 1..] {
                for m in Metric::ALL {
                    wins.extend(self.wins(a, b, m));
                }
            }
        }
        Summary { points: self.points(), methods, wins }
    }

    fn merge(mut self, other: MetricReport) -> Self {
        self.records.extend(other.records);
        self
    }
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

enum Predictor {
    Pgp(Box<PgpModel>),
    Interp(Box<GrassmannInterpolator>),
    Fixed(StiefelBasis),
    Oracle,
}

struct Prediction {
    basis: Option<StiefelBasis>,
    shrunk: bool,
    instability: bool,
}

impl Predictor {
    fn build(spec: &MethodSpec, bases: &TrainingBases) -> Result<Self> {
        Ok(match spec {
            MethodSpec::Pgp { kernel, basepoint, fit } => {
                let model = PgpModel::from_bases(bases, kernel.clone(), basepoint)?;
                let model = match fit {
                    Some((gamma, opts)) => {
                        let f = fit_hyperparameters(&model, kernel, *gamma, opts)?;
                        model.with_kernel(f.kernel, Some(f.sigma_k))?
                    }
                    None => model,
                };
                Predictor::Pgp(Box::new(model))
            }
            MethodSpec::Interp { scheme, basepoint } => {
                let basepoint = match basepoint {
                    InterpBasepointChoice::Medoid => InterpBasepoint::Medoid,
                    InterpBasepointChoice::GlobalPod => InterpBasepoint::Explicit(bases.global.clone()),
                    InterpBasepointChoice::Training(i) => InterpBasepoint::Training(*i),
                };
                let cfg = InterpolationConfig { scheme: scheme.clone(), basepoint };
                Predictor::Interp(Box::new(GrassmannInterpolator::fit(&bases.subspaces(), &cfg)?))
            }
            MethodSpec::GlobalPod => Predictor::Fixed(bases.global.clone()),
            MethodSpec::Oracle => Predictor::Oracle,
        })
    }

    fn predict(&self, theta: &ParameterPoint) -> Result<Prediction> {
        Ok(match self {
            Predictor::Pgp(m) => {
                let d = m.predict(theta)?;
                Prediction { basis: Some(d.map_subspace.into_basis()), shrunk: d.shrunk, instability: false }
            }
            Predictor::Interp(m) => {
                let out = m.predict(theta)?;
                Prediction { basis: Some(out.subspace.into_basis()), shrunk: false, instability: out.warning.is_some() }
            }
            Predictor::Fixed(b) => Prediction { basis: Some(b.clone()), shrunk: false, instability: false },
            Predictor::Oracle => Prediction { basis: None, shrunk: false, instability: false },
        })
    }
}

fn score(
    d: &DMatrix<f64>,
    theta: &ParameterPoint,
    method: &str,
    pred: Prediction,
    optimal: &StiefelBasis,
    e_star: f64,
) -> Result<PointRecord> {
    let basis = pred.basis.as_ref().unwrap_or(optimal);
    let e_f = error_frobenius(d, basis)?;
    let e_r = match relative_from(e_f, e_star, d) {
        Ok(v) => Some(v),
        Err(Error::ZeroOptimalError) => None,
        Err(e) => return Err(e),
    };
    Ok(PointRecord {
        theta: theta.clone(),
        method: method.into(),
        e_f,
        e_r,
        e_a: error_angle(optimal, basis)?,
        e_i: error_infinity(d, basis)?,
        shrunk: pred.shrunk,
        instability: pred.instability,
    })
}

/// Trains every method on `train` and scores it on every matrix of `test`.
pub fn compare_methods(
    train: &[SnapshotMatrix],
    test: &[SnapshotMatrix],
    methods: &[Method],
    r: usize,
    pod: PodOptions,
) -> Result<MetricReport> {
    let bases = TrainingBases::compute(train, r, pod)?;
    compare_with_bases(&bases, test, methods, r, pod)
}

/// As [`compare_methods`], reusing precomputed training bases.
pub fn compare_with_bases(
    bases: &TrainingBases,
    test: &[SnapshotMatrix],
    methods: &[Method],
    r: usize,
    pod: PodOptions,
) -> Result<MetricReport> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods to compare".into()));
    }
    for t in test {
        if bases.thetas.iter().any(|s| s == &t.theta) {
            return Err(Error::InvalidConfig(format!("test point {} is also a training point", t.theta)));
        }
    }
    let predictors = methods.iter().map(|m| Predictor::build(&m.spec, bases)).collect::<Result<Vec<_>>>()?;
    let records = test
        .par_iter()
        .map(|s| {
            let optimal = compute_pod_with(&s.data, r, pod)?.basis;
            let e_star = error_frobenius(&s.data, &optimal)?;
            methods
                .iter()
                .zip(&predictors)
                .map(|(m, p)| score(&s.data, &s.theta, &m.name, p.predict(&s.theta)?, &optimal, e_star))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport { methods: methods.iter().map(|m| m.name.clone()).collect(), records })
}

/// Leave-one-out over the parameter points of `samples`.
pub fn loocv(samples: &[SnapshotMatrix], methods: &[Method], r: usize, pod: PodOptions) -> Result<MetricReport> {
    if samples.len() < 3 {
        return Err(Error::InvalidConfig("leave-one-out needs at least three points".into()));
    }
    let mut report: Option<MetricReport> = None;
    for i in 0..samples.len() {
        let train: Vec<SnapshotMatrix> =
            samples.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect();
        let fold = compare_methods(&train, &samples[i..=i], methods, r, pod)?;
        report = Some(match report {
            None => fold,
            Some(acc) => acc.merge(fold),
        });
    }
    Ok(report.expect("at least three folds"))
}

/// Long-format CSV: one row per point, method and metric.
pub fn write_report_csv(path: &Path, report: &MetricReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let names: Vec<String> = report.records.first().map(|row| row[0].theta.names().to_vec()).unwrap_or_default();
    let mut header = vec!["point".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["method", "metric", "value", "shrunk", "instability"].map(String::from));
    w.write_record(&header)?;
    for (p, row) in report.records.iter().enumerate() {
        for rec in row {
            for m in Metric::ALL {
                let mut fields = vec![p.to_string()];
                fields.extend(rec.theta.values().iter().map(|v| v.to_string()));
                fields.push(rec.method.clone());
                fields.push(m.name().into());
                fields.push(rec.get(m).map_or_else(|| "NA".to_string(), |v| v.to_string()));
                fields.push(rec.shrunk.to_string());
                fields.push(rec.instability.to_string());
                w.write_record(&fields)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &Path, report: &MetricReport) -> Result<Summary> {
    let summary = report.summary();
    fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(v: f64, d: DMatrix<f64>) -> SnapshotMatrix {
        SnapshotMatrix::new(ParameterPoint::new(["d"], vec![v]).unwrap(), d).unwrap()
    }

    /// Smoothly varying matrices: a drifting low-rank signal plus a fixed part.
    fn family(k: usize, seed: u64) -> Vec<SnapshotMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian_matrix(&mut rng, 16, 8);
        let b = gaussian_matrix(&mut rng, 16, 8);
        (0..k)
            .map(|i| {
                let t = i as f64 / (k - 1) as f64;
                sample(t, &a + &b * (0.5 * t))
            })
            .collect()
    }

    fn methods() -> Vec<Method> {
        vec![
            Method::new("global-pod", MethodSpec::GlobalPod),
            Method::new("oracle", MethodSpec::Oracle),
            Method::new("interp", MethodSpec::Interp { scheme: InterpolationScheme::Lagrange, basepoint: Default::default() }),
            Method::new(
                "pgp",
                MethodSpec::Pgp { kernel: KernelSpec::ard(0.0, 1.0, vec![0.5]), basepoint: BasepointChoice::GlobalPod, fit: None },
            ),
        ]
    }

    #[test]
    fn oracle_wins_every_point_on_frobenius_error() {
        let all = family(7, 1);
        let (train, test): (Vec<_>, Vec<_>) = all.into_iter().enumerate().partition(|(i, _)| i % 2 == 0);
        let train: Vec<_> = train.into_iter().map(|(_, s)| s).collect();
        let test: Vec<_> = test.into_iter().map(|(_, s)| s).collect();
        let report = compare_methods(&train, &test, &methods(), 2, PodOptions::default()).unwrap();
        let w = report.wins("oracle", "global-pod", Metric::Frobenius).unwrap();
        assert_eq!(w.a_wins, test.len());
        for row in &report.records {
            let oracle = &row[1];
            assert!(oracle.e_r.unwrap().abs() < 1e-8 && oracle.e_a < 1e-12);
            for rec in row {
                assert!(rec.e_f >= oracle.e_f - 1e-10);
                assert!(rec.e_r.unwrap() >= -1e-8);
            }
        }
        let s = report.summary();
        for w in &s.wins {
            assert_eq!(w.a_wins + w.b_wins + w.ties, test.len());
        }
    }

    #[test]
    fn identical_methods_only_tie() {
        let all = family(5, 2);
        let two = vec![Method::new("a", MethodSpec::GlobalPod), Method::new("b", MethodSpec::GlobalPod)];
        let report = compare_methods(&all[..3], &all[3..], &two, 2, PodOptions::default()).unwrap();
        for m in Metric::ALL {
            let w = report.wins("a", "b", m).unwrap();
            assert_eq!((w.a_wins, w.b_wins, w.ties), (0, 0, 2));
        }
    }

    #[test]
    fn loocv_has_one_record_per_point_and_constant_maps_are_exact() {
        let fam = family(4, 3);
        let report = loocv(&fam, &methods(), 2, PodOptions::default()).unwrap();
        assert_eq!(report.points(), 4);
        let d = fam[0].data.clone();
        let same: Vec<_> = (0..3).map(|i| sample(i as f64, d.clone())).collect();
        let report = loocv(&same, &methods(), 2, PodOptions::default()).unwrap();
        for row in &report.records {
            for rec in row {
                assert!(rec.e_a < 1e-7, "{} {}", rec.method, rec.e_a);
            }
        }
        assert!(loocv(&same[..2], &methods(), 2, PodOptions::default()).is_err());
    }

    #[test]
    fn overlapping_splits_are_rejected() {
        let all = family(4, 4);
        assert!(compare_methods(&all, &all[..1], &methods(), 2, PodOptions::default()).is_err());
    }

    #[test]
    fn report_files_are_written() {
        let all = family(5, 5);
        let report = compare_methods(&all[..3], &all[3..], &methods(), 2, PodOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report_csv(&dir.path().join("report.csv"), &report).unwrap();
        let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 4 * 4);
        assert!(text.starts_with("point,d,method,metric,value,shrunk,instability"));
        let s = write_summary_json(&dir.path().join("summary.json"), &report).unwrap();
        let back: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
