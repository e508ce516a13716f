//! Subcommand bodies. Each takes a resolved config and an output directory
//! and writes only inside that directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use pgp_core::dataset::{read_dataset, write_dataset, write_matrix, Dataset, Split};
use pgp_core::metrics::{compare_with_bases, loocv, write_report_csv, write_summary_json, Method, MethodSpec, MetricReport};
use pgp_core::pde::{build_parameter_grid, ParameterPoint, SnapshotMatrix};
use pgp_core::pgp::{
    fit_hyperparameters, gamma_sweep, load_model, BasepointChoice, save_model, uncertainty_stddev, FitResult, KernelSpec, PgpModel,
    TrainingBases,
};
use pgp_core::pod::PodOptions;
use pgp_core::study::{build_dataset, StudyPreset};
use pgp_core::{Error, Result};

use crate::config::{BasepointConfig, MethodName, RunConfig};
use crate::io::{read_thetas, write_csv};

pub struct Run {
    pub command: &'static str,
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Run {
    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn write_run_record(&self) -> Result<()> {
        let record = json!({
            "command": self.command,
            "config_hash": self.cfg.hash(self.command),
            "seed": self.seed(),
            "config": self.cfg,
        });
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join("run.json"), serde_json::to_string_pretty(&record)? + "\n")?;
        Ok(())
    }

    pub fn execute(&self) -> Result<()> {
        match self.command {
            "simulate" => self.simulate(),
            "train" => self.train(),
            "predict" => self.predict(),
            "evaluate" => self.evaluate(),
            "uq" => self.uq(),
            "study" => self.study(),
            other => Err(Error::InvalidConfig(format!("unknown command {other}"))),
        }?;
        self.write_run_record()
    }

    fn dataset(&self) -> Result<Dataset> {
        if let Some(dir) = &self.cfg.dataset {
            return read_dataset(dir);
        }
        let train = self
            .cfg
            .train_grid
            .clone()
            .ok_or_else(|| Error::InvalidConfig("set `dataset` or `train_grid`".into()))?;
        let preset = StudyPreset {
            solver: self.cfg.solver.clone().unwrap_or_default(),
            train,
            test: self.cfg.test_grid.clone().unwrap_or_default(),
            r: self.cfg.rank(),
        };
        build_dataset(&preset, self.cfg.pod_centering)
    }

    fn pod(&self, ds: &Dataset) -> PodOptions {
        PodOptions { center: ds.pod_centering }
    }

    fn template(&self, dim: usize) -> KernelSpec {
        self.cfg.kernel.clone().unwrap_or_else(|| KernelSpec::ard(0.1, 1.0, vec![0.5; dim]))
    }

    fn basepoint(&self) -> BasepointChoice {
        self.cfg.basepoint.as_ref().map_or(BasepointChoice::GlobalPod, BasepointConfig::choice)
    }

    fn model_dir(&self) -> Result<&Path> {
        self.cfg.model.as_deref().ok_or_else(|| Error::InvalidConfig("set `model` (or pass --model)".into()))
    }

    fn simulate(&self) -> Result<()> {
        let ds = self.dataset()?;
        let manifest = write_dataset(&self.out, &ds)?;
        println!("wrote {} snapshot matrices to {}", manifest.entries.len(), self.out.display());
        Ok(())
    }

    /// Builds the pGP on `train` at rank `r`, fitting the kernel when enabled.
    fn fit_model(&self, bases: &TrainingBases) -> Result<(PgpModel, Option<FitResult>)> {
        let template = self.template(bases.thetas[0].dim());
        let basepoint = self.basepoint();
        let model = PgpModel::from_bases(bases, template.clone(), &basepoint)?;
        if !self.cfg.fit.enabled {
            return Ok((model, None));
        }
        let fit = fit_hyperparameters(&model, &template, self.cfg.fit.gamma, &self.cfg.fit.options())?;
        Ok((model.with_kernel(fit.kernel.clone(), Some(fit.sigma_k))?, Some(fit)))
    }

    fn train(&self) -> Result<()> {
        let ds = self.dataset()?;
        let train = training_samples(&ds)?;
        let bases = TrainingBases::compute(&train, self.cfg.rank(), self.pod(&ds))?;
        let (model, fit) = self.fit_model(&bases)?;
        save_model(&self.out.join("model"), &model, self.cfg.seed)?;
        if let Some(fit) = fit {
            fs::write(self.out.join("fit.json"), serde_json::to_string_pretty(&fit_json(self.cfg.fit.gamma, &fit))? + "\n")?;
        }
        println!("trained on {} points (r = {}); model in {}", model.k(), model.r(), self.out.join("model").display());
        Ok(())
    }

    fn predict(&self) -> Result<()> {
        let (model, _) = load_model(self.model_dir()?)?;
        let path = self.cfg.thetas.as_deref().ok_or_else(|| Error::InvalidConfig("set `thetas` (or pass --thetas)".into()))?;
        let thetas = read_thetas(path, &model.standardization().names)?;
        fs::create_dir_all(&self.out)?;
        let width = thetas.len().to_string().len().max(3);
        let mut rows = Vec::with_capacity(thetas.len());
        for (i, theta) in thetas.iter().enumerate() {
            let dist = model.predict(theta)?;
            let basis_file = format!("basis_{i:0width$}.txt");
            let coords_file = format!("coords_{i:0width$}.txt");
            write_matrix(&self.out.join(&basis_file), dist.map_subspace.basis().matrix())?;
            let coords = dist.mean_coords.vector();
            write_matrix(&self.out.join(&coords_file), &nalgebra::DMatrix::from_column_slice(coords.len(), 1, coords.as_slice()))?;
            let mut row = vec![i.to_string()];
            row.extend(theta.values().iter().map(f64::to_string));
            row.extend([dist.shrunk.to_string(), dist.variance_scale.to_string(), basis_file, coords_file]);
            rows.push(row);
        }
        let mut header = vec!["index".to_string()];
        header.extend(model.standardization().names.iter().cloned());
        header.extend(["shrunk", "variance_scale", "basis_file", "coords_file"].map(String::from));
        write_csv(&self.out.join("predictions.csv"), &header, &rows)?;
        println!("predicted {} bases into {}", thetas.len(), self.out.display());
        Ok(())
    }

    fn methods(&self, dim: usize, pgp_kernel: Option<KernelSpec>) -> Vec<Method> {
        let basepoint = self.basepoint();
        self.cfg
            .evaluate
            .methods
            .iter()
            .map(|m| match m {
                MethodName::Pgp => {
                    let spec = match &pgp_kernel {
                        Some(k) => MethodSpec::Pgp { kernel: k.clone(), basepoint: basepoint.clone(), fit: None },
                        None => MethodSpec::Pgp {
                            kernel: self.template(dim),
                            basepoint: basepoint.clone(),
                            fit: self.cfg.fit.enabled.then(|| (self.cfg.fit.gamma, self.cfg.fit.options())),
                        },
                    };
                    Method::new("pgp", spec)
                }
                MethodName::Interp => Method::new(
                    "interp",
                    MethodSpec::Interp { scheme: self.cfg.interp.scheme(), basepoint: self.cfg.interp.basepoint() },
                ),
                MethodName::GlobalPod => Method::new("global-pod", MethodSpec::GlobalPod),
            })
            .collect()
    }

    fn write_report(&self, dir: &Path, stem: &str, report: &MetricReport) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_report_csv(&dir.join(format!("{stem}.csv")), report)?;
        let summary = write_summary_json(&dir.join(if stem == "report" { "summary.json".into() } else { format!("{stem}_summary.json") }), report)?;
        for w in summary.wins.iter().filter(|w| w.a == "pgp") {
            println!("  {} vs {} on {}: {} wins, {} losses, {} ties", w.a, w.b, w.metric.name(), w.a_wins, w.b_wins, w.ties);
        }
        Ok(())
    }

    fn evaluate(&self) -> Result<()> {
        let ds = self.dataset()?;
        let pod = self.pod(&ds);
        let r = self.cfg.rank();
        if self.cfg.evaluate.loocv {
            let all: Vec<SnapshotMatrix> = ds.samples.iter().map(|(m, _)| m.clone()).collect();
            let methods = self.methods(dim_of(&all)?, None);
            let report = loocv(&all, &methods, r, pod)?;
            println!("leave-one-out over {} points", report.points());
            return self.write_report(&self.out, "report", &report);
        }
        let train = training_samples(&ds)?;
        let test = ds.split(Split::Test);
        if test.is_empty() {
            return Err(Error::InvalidConfig("dataset has no test split (set `test_grid` or `evaluate.loocv`)".into()));
        }
        let bases = TrainingBases::compute(&train, r, pod)?;
        let report = compare_with_bases(&bases, &test, &self.methods(dim_of(&train)?, None), r, pod)?;
        println!("evaluated {} test points", report.points());
        self.write_report(&self.out, "report", &report)
    }

    fn uq_grid(&self) -> Result<Vec<ParameterPoint>> {
        let axes = self
            .cfg
            .uq
            .grid
            .clone()
            .or_else(|| self.cfg.test_grid.clone())
            .ok_or_else(|| Error::InvalidConfig("set `uq.grid` or `test_grid`".into()))?;
        build_parameter_grid(&axes)
    }

    fn write_uq(&self, path: &Path, model: &PgpModel, grid: &[ParameterPoint]) -> Result<()> {
        let mut rows = Vec::with_capacity(grid.len());
        for (i, theta) in grid.iter().enumerate() {
            let dist = model.predict(theta)?;
            let sd = uncertainty_stddev(&dist, model, self.cfg.uq.samples, self.seed().wrapping_add(i as u64))?;
            let mut row = vec![i.to_string()];
            row.extend(theta.values().iter().map(f64::to_string));
            row.extend([dist.variance_scale.to_string(), sd.to_string(), dist.shrunk.to_string()]);
            rows.push(row);
        }
        let mut header = vec!["index".to_string()];
        header.extend(model.standardization().names.iter().cloned());
        header.extend(["variance_scale", "stddev", "shrunk"].map(String::from));
        write_csv(path, &header, &rows)
    }

    fn uq(&self) -> Result<()> {
        let (model, _) = load_model(self.model_dir()?)?;
        let grid = self.uq_grid()?;
        fs::create_dir_all(&self.out)?;
        self.write_uq(&self.out.join("uq.csv"), &model, &grid)?;
        println!("uncertainty at {} points ({} samples each)", grid.len(), self.cfg.uq.samples);
        Ok(())
    }

    fn study(&self) -> Result<()> {
        let ds = self.dataset()?;
        if self.cfg.write_dataset {
            write_dataset(&self.out.join("dataset"), &ds)?;
        }
        let pod = self.pod(&ds);
        let train = training_samples(&ds)?;
        let test = ds.split(Split::Test);
        let ranks = self.cfg.ranks.clone().unwrap_or_else(|| vec![self.cfg.rank()]);
        let mut index = Vec::new();
        for r in ranks {
            let dir = self.out.join(format!("r{r}"));
            fs::create_dir_all(&dir)?;
            println!("rank {r}:");
            let bases = TrainingBases::compute(&train, r, pod)?;
            let template = self.template(train[0].theta.dim());
            let basepoint = self.basepoint();
            let base_model = PgpModel::from_bases(&bases, template.clone(), &basepoint)?;
            let model = if self.cfg.fit.enabled {
                let mut gammas = self.cfg.fit.gammas.clone();
                if gammas.is_empty() {
                    gammas.push(self.cfg.fit.gamma);
                }
                let sweep = gamma_sweep(&base_model, &template, &gammas, &self.cfg.fit.options())?;
                write_gamma_sweep(&dir.join("gamma_sweep.csv"), &gammas, &sweep)?;
                let chosen = gammas.iter().position(|g| *g == self.cfg.fit.gamma).unwrap_or(0);
                println!("  fitted kernel at gamma = {}: {:?}", gammas[chosen], sweep[chosen].kernel.length_scales());
                base_model.with_kernel(sweep[chosen].kernel.clone(), Some(sweep[chosen].sigma_k))?
            } else {
                base_model
            };
            save_model(&dir.join("model"), &model, self.cfg.seed)?;
            let methods = self.methods(train[0].theta.dim(), Some(model.kernel().clone()));
            if !test.is_empty() {
                let report = compare_with_bases(&bases, &test, &methods, r, pod)?;
                self.write_report(&dir, "report", &report)?;
            }
            if self.cfg.evaluate.loocv {
                let all: Vec<SnapshotMatrix> = ds.samples.iter().map(|(m, _)| m.clone()).collect();
                let report = loocv(&all, &methods, r, pod)?;
                self.write_report(&dir, "loocv", &report)?;
            }
            let grid = match (&self.cfg.uq.grid, test.is_empty()) {
                (Some(axes), _) => build_parameter_grid(axes)?,
                (None, false) => test.iter().map(|s| s.theta.clone()).collect(),
                (None, true) => Vec::new(),
            };
            if !grid.is_empty() {
                self.write_uq(&dir.join("uq.csv"), &model, &grid)?;
            }
            index.push(json!({ "r": r, "dir": format!("r{r}"), "kernel": model.kernel(), "sigma_k": model.sigma_k() }));
        }
        fs::write(self.out.join("study.json"), serde_json::to_string_pretty(&index)? + "\n")?;
        Ok(())
    }
}

fn training_samples(ds: &Dataset) -> Result<Vec<SnapshotMatrix>> {
    let train = ds.split(Split::Train);
    if train.is_empty() {
        return Err(Error::InvalidConfig("dataset has no training entries".into()));
    }
    Ok(train)
}

fn dim_of(samples: &[SnapshotMatrix]) -> Result<usize> {
    samples.first().map(|s| s.theta.dim()).ok_or_else(|| Error::InvalidConfig("dataset is empty".into()))
}

fn fit_json(gamma: f64, fit: &FitResult) -> serde_json::Value {
    json!({
        "gamma": gamma,
        "kernel": fit.kernel,
        "sigma_k": fit.sigma_k,
        "log_likelihood": fit.log_likelihood,
        "objective": fit.objective,
    })
}

fn write_gamma_sweep(path: &Path, gammas: &[f64], sweep: &[FitResult]) -> Result<()> {
    let scales = sweep.first().map(|f| f.kernel.length_scales().len()).unwrap_or(0);
    let mut header = vec!["gamma".to_string()];
    header.extend((0..scales).map(|i| format!("length_scale_{i}")));
    header.extend(["prior_variance", "sigma_k", "log_likelihood", "objective"].map(String::from));
    let rows: Vec<Vec<String>> = gammas
        .iter()
        .zip(sweep)
        .map(|(g, f)| {
            let mut row = vec![g.to_string()];
            row.extend(f.kernel.length_scales().iter().map(f64::to_string));
            row.extend([f.kernel.prior_variance(), f.sigma_k, f.log_likelihood, f.objective].map(|v| v.to_string()));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}
