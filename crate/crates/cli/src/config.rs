//! Run configuration: one TOML file, validated before any work starts.
//!
//! Every table and key is optional; presets and defaults fill the gaps. Unknown
//! keys are rejected at every level. See `docs/config.md` for the schema.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pgp_core::interp::InterpolationScheme;
use pgp_core::metrics::InterpBasepointChoice;
use pgp_core::pde::{GridAxis, SolverConfig};
use pgp_core::pgp::{BasepointChoice, FitOptions, KernelSpec};
use pgp_core::study::{four_parameter_desk, loocv_sweep, two_parameter_desk, StudyPreset, FOUR_PARAMETER_GROUPS};
use pgp_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    TwoParameter,
    FourParameter,
    Loocv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasepointConfig {
    GlobalPod,
    Central,
    Training(usize),
}

impl BasepointConfig {
    pub fn choice(&self) -> BasepointChoice {
        match self {
            Self::GlobalPod => BasepointChoice::GlobalPod,
            Self::Central => BasepointChoice::Central,
            Self::Training(i) => BasepointChoice::Training(*i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpBasepointConfig {
    Medoid,
    GlobalPod,
    Training(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    GaussianRbf,
    Lagrange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpConfig {
    pub scheme: SchemeName,
    /// RBF bandwidth on standardized parameters; mean nearest-neighbour
    /// distance when absent.
    pub bandwidth: Option<f64>,
    pub basepoint: InterpBasepointConfig,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self { scheme: SchemeName::GaussianRbf, bandwidth: None, basepoint: InterpBasepointConfig::Medoid }
    }
}

impl InterpConfig {
    pub fn scheme(&self) -> InterpolationScheme {
        match self.scheme {
            SchemeName::GaussianRbf => InterpolationScheme::GaussianRbf { bandwidth: self.bandwidth },
            SchemeName::Lagrange => InterpolationScheme::Lagrange,
        }
    }

    pub fn basepoint(&self) -> InterpBasepointChoice {
        match self.basepoint {
            InterpBasepointConfig::Medoid => InterpBasepointChoice::Medoid,
            InterpBasepointConfig::GlobalPod => InterpBasepointChoice::GlobalPod,
            InterpBasepointConfig::Training(i) => InterpBasepointChoice::Training(i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Estimate hyperparameters by maximum likelihood; otherwise the kernel
    /// is used as given.
    pub enabled: bool,
    pub gamma: f64,
    /// Regularization sweep of the `study` command.
    pub gammas: Vec<f64>,
    pub restarts: usize,
    pub max_iters: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let opts = FitOptions::default();
        Self { enabled: true, gamma: 0.0, gammas: Vec::new(), restarts: opts.restarts, max_iters: opts.max_iters }
    }
}

impl FitConfig {
    pub fn options(&self) -> FitOptions {
        FitOptions { restarts: self.restarts, max_iters: self.max_iters, warm_start: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UqConfig {
    pub samples: usize,
    /// Evaluation grid; the test grid when absent.
    pub grid: Option<Vec<GridAxis>>,
}

impl Default for UqConfig {
    fn default() -> Self {
        Self { samples: 1000, grid: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Pgp,
    Interp,
    GlobalPod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub methods: Vec<MethodName>,
    /// Leave-one-out over every dataset point instead of the train/test split.
    pub loocv: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { methods: vec![MethodName::Pgp, MethodName::Interp, MethodName::GlobalPod], loocv: false }
    }
}

/// File contents as written by the user.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Existing dataset directory; simulated from the grids when absent.
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// CSV of query parameters with a header row of parameter names.
    pub thetas: Option<PathBuf>,
    pub solver: Option<SolverConfig>,
    pub train_grid: Option<Vec<GridAxis>>,
    pub test_grid: Option<Vec<GridAxis>>,
    pub r: Option<usize>,
    /// Ranks of the `study` sub-studies; `[r]` when absent.
    pub ranks: Option<Vec<usize>>,
    pub pod_centering: bool,
    pub write_dataset: bool,
    pub kernel: Option<KernelSpec>,
    pub basepoint: Option<BasepointConfig>,
    pub fit: FitConfig,
    pub interp: InterpConfig,
    pub uq: UqConfig,
    pub evaluate: EvaluateConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::SchemaMismatch(format!("config: {}", e.message())))
    }

    /// Fills unset fields from the preset and the built-in defaults, then
    /// validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        let preset: Option<StudyPreset> = self.preset.map(|p| match p {
            Preset::TwoParameter => two_parameter_desk(),
            Preset::FourParameter => four_parameter_desk(),
            Preset::Loocv => loocv_sweep(),
        });
        if let Some(p) = &preset {
            self.solver.get_or_insert_with(|| p.solver.clone());
            self.train_grid.get_or_insert_with(|| p.train.clone());
            if self.test_grid.is_none() && !p.test.is_empty() {
                self.test_grid = Some(p.test.clone());
            }
            self.r.get_or_insert(p.r);
        }
        match self.preset {
            Some(Preset::FourParameter) => {
                self.basepoint.get_or_insert(BasepointConfig::Central);
                self.kernel.get_or_insert_with(|| {
                    KernelSpec::ard_grouped(0.1, 1.0, vec![0.5, 0.5], FOUR_PARAMETER_GROUPS.to_vec())
                });
                if self.fit.gammas.is_empty() {
                    self.fit.gammas = vec![0.0, 500.0, 1000.0, 1500.0, 2000.0];
                }
            }
            Some(Preset::Loocv) => {
                self.evaluate.loocv = true;
                self.kernel.get_or_insert_with(|| KernelSpec::exponential(1.0, 0.5));
            }
            _ => {}
        }
        self.kernel = self.kernel.map(KernelSpec::with_default_groups);
        self.solver.get_or_insert_with(SolverConfig::default);
        self.r.get_or_insert(5);
        self.basepoint.get_or_insert(BasepointConfig::GlobalPod);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.r == Some(0) {
            return bad("r must be at least 1".into());
        }
        if let Some(ranks) = &self.ranks {
            if ranks.is_empty() || ranks.contains(&0) {
                return bad("ranks must be a non-empty list of positive integers".into());
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.uq.samples < 2 {
            return bad("uq.samples must be at least 2".into());
        }
        if !(self.fit.gamma >= 0.0) || self.fit.gammas.iter().any(|g| !(*g >= 0.0)) {
            return bad("regularization weights must be non-negative".into());
        }
        if self.fit.restarts == 0 || self.fit.max_iters == 0 {
            return bad("fit.restarts and fit.max_iters must be positive".into());
        }
        if self.evaluate.methods.is_empty() {
            return bad("evaluate.methods is empty".into());
        }
        if self.evaluate.methods.iter().collect::<BTreeSet<_>>().len() != self.evaluate.methods.len() {
            return bad("evaluate.methods lists a method twice".into());
        }
        if let Some(b) = self.interp.bandwidth {
            if !(b > 0.0) {
                return bad("interp.bandwidth must be positive".into());
            }
        }
        for grid in [&self.train_grid, &self.test_grid, &self.uq.grid].into_iter().flatten() {
            let mut names = BTreeSet::new();
            for axis in grid {
                if !names.insert(&axis.name) {
                    return bad(format!("grid axis {} appears twice", axis.name));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.r.unwrap_or(5)
    }

    /// Hex SHA-256 of everything that affects results: the resolved config
    /// without `out` and `threads`, prefixed by the command name.
    pub fn hash(&self, command: &str) -> String {
        let mut hashed = self.clone();
        hashed.out = None;
        hashed.threads = None;
        let text = serde_json::to_string(&hashed).expect("config serializes");
        let digest = Sha256::new().chain_update(command.as_bytes()).chain_update([0u8]).chain_update(text).finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        assert!(RunConfig::parse("rank = 5").is_err());
        assert!(RunConfig::parse("[fit]\ngama = 1.0").is_err());
        assert!(RunConfig::parse("[solver]\nnx = 9\nnz = 3").is_err());
        assert!(RunConfig::parse("[[train_grid]]\nname = \"d\"\nlo = 0.0\nhi = 1.0\nstep = 0.5\nmid = 3").is_err());
    }

    #[test]
    fn presets_fill_defaults_and_explicit_values_win() {
        let cfg = RunConfig::parse("preset = \"two-parameter\"\nr = 3").unwrap().resolve().unwrap();
        assert_eq!(cfg.rank(), 3);
        assert_eq!(cfg.train_grid.as_ref().unwrap().len(), 2);
        assert!(cfg.test_grid.is_some());
        let four = RunConfig::parse("preset = \"four-parameter\"").unwrap().resolve().unwrap();
        assert_eq!(four.basepoint, Some(BasepointConfig::Central));
        assert_eq!(four.fit.gammas.len(), 5);
    }

    #[test]
    fn tables_parse_into_core_types() {
        let text = r#"
            basepoint = { training = 2 }
            [kernel]
            family = "ard-squared-exponential"
            nugget = 0.0
            signal = 1.0
            length_scales = [0.3]
            [interp]
            scheme = "lagrange"
            basepoint = "global-pod"
        "#;
        let cfg = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.basepoint, Some(BasepointConfig::Training(2)));
        assert_eq!(cfg.kernel, Some(KernelSpec::ard(0.0, 1.0, vec![0.3])));
        assert_eq!(cfg.interp.scheme(), InterpolationScheme::Lagrange);
    }

    #[test]
    fn invalid_values_fail_validation() {
        for text in ["r = 0", "[uq]\nsamples = 1", "[fit]\ngamma = -1.0", "[evaluate]\nmethods = [\"pgp\", \"pgp\"]"] {
            let err = RunConfig::parse(text).unwrap().resolve().unwrap_err();
            assert!(matches!(err, Error::InvalidConfig(_)), "{text}: {err}");
        }
    }

    #[test]
    fn hash_ignores_output_location_but_not_seed() {
        let a = RunConfig::parse("seed = 1").unwrap().resolve().unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        b.threads = Some(3);
        assert_eq!(a.hash("train"), b.hash("train"));
        assert_ne!(a.hash("train"), a.hash("evaluate"));
        b.seed = Some(2);
        assert_ne!(a.hash("train"), b.hash("train"));
    }
}
