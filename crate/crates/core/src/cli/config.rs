//! Experiment configuration (TOML).
//!
//! ```toml
//! seeds = [0, 1, 2]           # compare runs every seed; run uses the first
//! solver = "krylov"           # default subproblem solver: exact | krylov | cauchy
//! standardize = false
//!
//! [model]
//! kind = "logistic_nonconvex" # robust_linear | quadratic | rosenbrock
//! chi = 0.1
//! # Either a data file (path relative to this file) ...
//! # dataset = "train.svm"
//! # format = "libsvm"         # or "csv" with label_col = <0-based column>
//! # ... or a synthetic spec; its seed defaults to the run seed.
//! synthetic = { n = 200, d = 50, label_noise = 0.05 }
//! # Analytic models take `dim`, and `seed` picks a random quadratic.
//!
//! [x0]
//! policy = "seeded_gaussian"  # or "zeros"
//! scale = 3.0
//! seed = 1000                 # offset added to the run seed
//!
//! [stop]
//! grad_tol = 1e-6
//! max_iter = 1000
//! # max_seconds = 60.0
//!
//! [output]
//! dir = "arcm-out"
//!
//! # [subsample]
//! # n_max = 1000
//! # seed = 0
//!
//! [[optimizer]]
//! kind = "arcm"
//!
//! [[optimizer]]
//! kind = "cr"
//! label = "cr-m0.1"
//! solver = "exact"
//! params = { fixed_m = 0.1 }
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::data::{gen_synthetic, load_csv, load_libsvm, standardize, Dataset, SyntheticSpec, Task};
use crate::error::{Error, Result};
use crate::objective::{make_objective, ModelKind, ModelSpec, Objective, Point, DEFAULT_DENSE_CAP};
use crate::optimizers::{HyperParams, OptimizerKind, StopCriteria, SubproblemSolver};

fn default_chi() -> f64 {
    0.1
}

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_solver() -> SubproblemSolver {
    SubproblemSolver::Krylov
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub label_noise: f64,
    /// Fixed dataset seed; the run seed is used when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_chi")]
    pub chi: f64,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub dataset: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub label_col: Option<usize>,
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Policy {
    #[default]
    Zeros,
    SeededGaussian {
        scale: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Name used for output files; defaults to the kind.
    pub label: Option<String>,
    pub solver: Option<SubproblemSolver>,
    #[serde(default)]
    pub params: HyperParams,
}

impl OptimizerConfig {
    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("arcm-out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub n_max: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(rename = "optimizer", default)]
    pub optimizers: Vec<OptimizerConfig>,
    #[serde(default)]
    pub x0: X0Policy,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub subsample: Option<SubsampleConfig>,
    #[serde(default = "default_solver")]
    pub solver: SubproblemSolver,
    #[serde(default)]
    pub standardize: bool,
    /// Directory that relative dataset paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.optimizers.is_empty() {
            return Err(Error::Config("at least one [[optimizer]] is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.stop
            .validate()
            .map_err(|e| Error::Config(format!("stop: {}", strip(&e))))?;
        let mut names = HashSet::new();
        for o in &self.optimizers {
            let name = o.name();
            o.params
                .validate()
                .map_err(|e| Error::Config(format!("optimizer `{name}`: {}", strip(&e))))?;
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(Error::Config(format!("optimizer label `{name}` is not a valid file stem")));
            }
            if !names.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate optimizer label `{name}`")));
            }
        }
        if let X0Policy::SeededGaussian { scale, .. } = self.x0 {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Config("x0.scale must be a finite nonnegative number".into()));
            }
        }
        let m = &self.model;
        match (m.kind.is_regression(), &m.dataset, &m.synthetic) {
            (true, Some(_), Some(_)) => {
                return Err(Error::Config("model: give either `dataset` or `synthetic`, not both".into()))
            }
            (true, None, None) => {
                return Err(Error::Config(format!("model `{}` needs `dataset` or `synthetic`", m.kind.as_str())))
            }
            (false, _, _) if m.dataset.is_some() || m.synthetic.is_some() => {
                return Err(Error::Config(format!("model `{}` takes no data", m.kind.as_str())))
            }
            (false, _, _) if m.dim.unwrap_or(0) == 0 => {
                return Err(Error::Config(format!("model `{}` needs a positive `dim`", m.kind.as_str())))
            }
            _ => {}
        }
        if let Some(s) = &m.synthetic {
            self.synthetic_spec(s, 0)
                .validate()
                .map_err(|e| Error::Config(format!("model.synthetic: {}", strip(&e))))?;
        }
        if let Some(sub) = self.subsample {
            if sub.n_max == 0 {
                return Err(Error::Config("subsample.n_max must be positive".into()));
            }
        }
        if !(m.chi >= 0.0 && m.chi.is_finite()) {
            return Err(Error::Config(format!("model.chi must be >= 0, got {}", m.chi)));
        }
        Ok(())
    }

    fn synthetic_spec(&self, s: &SyntheticConfig, seed: u64) -> SyntheticSpec {
        let task = if self.model.kind == ModelKind::LogisticNonconvex {
            Task::Classification
        } else {
            Task::Regression
        };
        SyntheticSpec {
            n: s.n,
            d: s.d,
            label_noise: if task == Task::Classification { s.label_noise } else { 0.0 },
            task,
            seed: s.seed.unwrap_or(seed),
        }
    }

    /// Loads a file dataset once so that every run can share it.
    pub fn prepare(&self) -> Result<Experiment> {
        let file_dataset = match &self.model.dataset {
            None => None,
            Some(rel) => {
                let path = self.base_dir.join(rel);
                let format = self.model.format.unwrap_or(
                    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                        DataFormat::Csv
                    } else {
                        DataFormat::Libsvm
                    },
                );
                let ds = match format {
                    DataFormat::Libsvm => load_libsvm(&path)?,
                    DataFormat::Csv => load_csv(&path, self.model.label_col.unwrap_or(0))?,
                };
                Some(Arc::new(self.finish_dataset(ds)?))
            }
        };
        Ok(Experiment {
            config: self.clone(),
            file_dataset,
        })
    }

    fn finish_dataset(&self, ds: Dataset) -> Result<Dataset> {
        let ds = match self.subsample {
            Some(sub) => ds.subsample(sub.n_max, sub.seed),
            None => ds,
        };
        if self.standardize {
            standardize(&ds)
        } else {
            Ok(ds)
        }
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

/// Starting point for a run seed.
pub fn initial_point(policy: X0Policy, dim: usize, seed: u64) -> Point {
    match policy {
        X0Policy::Zeros => DVector::zeros(dim),
        X0Policy::SeededGaussian { scale, seed: offset } => {
            let mut rng = ChaCha8Rng::seed_from_u64(offset.wrapping_add(seed));
            DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        }
    }
}

/// A validated configuration with its data loaded.
pub struct Experiment {
    pub config: RunConfig,
    file_dataset: Option<Arc<Dataset>>,
}

pub struct Instance {
    pub objective: Box<dyn Objective>,
    pub x0: Point,
}

impl Experiment {
    /// Objective and starting point for one run seed.
    pub fn instance(&self, seed: u64) -> Result<Instance> {
        let cfg = &self.config;
        let m = &cfg.model;
        let spec = if m.kind.is_regression() {
            let ds = match (&self.file_dataset, &m.synthetic) {
                (Some(ds), _) => ds.clone(),
                (None, Some(s)) => Arc::new(cfg.finish_dataset(gen_synthetic(&cfg.synthetic_spec(s, seed))?)?),
                (None, None) => unreachable!("validated"),
            };
            if let Some(d) = m.dim {
                if d != ds.dim() {
                    return Err(Error::Config(format!(
                        "model.dim is {d} but the dataset has {} features",
                        ds.dim()
                    )));
                }
            }
            ModelSpec::regression(m.kind, ds, m.chi)
        } else {
            let mut spec = ModelSpec::analytic(m.kind, m.dim.unwrap_or(0));
            spec.seed = m.seed;
            spec
        };
        let spec = ModelSpec {
            dense_cap: m.dense_cap,
            ..spec
        };
        let objective = make_objective(&spec)?;
        let x0 = initial_point(cfg.x0, objective.dim(), seed);
        Ok(Instance { objective, x0 })
    }

    pub fn solver_for(&self, o: &OptimizerConfig) -> SubproblemSolver {
        o.solver.unwrap_or(self.config.solver)
    }
}
