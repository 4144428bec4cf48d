//! Experiment configuration with embedded desk-scale defaults.

use std::path::{Path, PathBuf};

use rbno_core::fields::GrfConfig;
use rbno_core::fosls::{ProblemConfig, ProblemKind};
use rbno_core::rbno::{TrainConfig, DEFAULT_PCA_DIM};
use rbno_core::rom::RankTarget;
use rbno_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    /// Cells per unit length; `nx`, `ny` override it per direction.
    pub n: usize,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec { n: 32, nx: None, ny: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeSpec {
    pub k: usize,
    /// Defaults to `k + 1`.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSpec {
    pub n_pod: usize,
    pub rank: Option<usize>,
    /// Relative eigenvalue tail; used when `rank` is absent.
    pub tolerance: Option<f64>,
}

impl Default for PodSpec {
    fn default() -> Self {
        PodSpec {
            n_pod: 128,
            rank: Some(32),
            tolerance: None,
        }
    }
}

impl PodSpec {
    pub fn target(&self) -> Result<RankTarget> {
        match (self.rank, self.tolerance) {
            (Some(r), _) if r > 0 => Ok(RankTarget::Rank(r)),
            (None, Some(t)) if t > 0.0 && t < 1.0 => Ok(RankTarget::Tolerance(t)),
            _ => Err(Error::InvalidInput("pod needs a positive rank or a tolerance in (0, 1)".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Counts {
    pub n_solve: usize,
    pub n_train: usize,
    /// Zero splits the training samples by `train.val_fraction`.
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            n_solve: 16,
            n_train: 256,
            n_val: 64,
            n_test: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSpec {
    pub levels: Vec<usize>,
    pub degrees: Vec<usize>,
}

impl Default for RatesSpec {
    fn default() -> Self {
        RatesSpec {
            levels: vec![8, 16, 32, 64],
            degrees: vec![0, 1],
        }
    }
}

/// Training defaults for desk-scale runs: stronger weight decay and a slower
/// step decay than the library defaults.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        weight_decay: 1.0,
        step_size: 200,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub mesh: MeshSpec,
    pub fe: FeSpec,
    pub grf: GrfConfig,
    pub nu: f64,
    pub pod: PodSpec,
    pub train: TrainConfig,
    pub counts: Counts,
    pub pca_dim: usize,
    pub rates: RatesSpec,
    /// Compare against solutions on the twice refined mesh.
    pub reference: bool,
    /// Add wall-time columns; these make outputs non-reproducible.
    pub timings: bool,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::HeatConduction,
            mesh: MeshSpec::default(),
            fe: FeSpec::default(),
            grf: GrfConfig::default(),
            nu: 0.4,
            pod: PodSpec::default(),
            train: desk_train_config(),
            counts: Counts::default(),
            pca_dim: DEFAULT_PCA_DIM,
            rates: RatesSpec::default(),
            reference: true,
            timings: false,
            seed: 0,
            workers: 1,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Finite-element problem at the configured resolution.
    pub fn problem_config(&self) -> ProblemConfig {
        let mut pc = ProblemConfig::new(self.problem, self.mesh.n, self.fe.k);
        if let Some(nx) = self.mesh.nx {
            pc.nx = nx;
        }
        if let Some(ny) = self.mesh.ny {
            pc.ny = ny;
        }
        pc.m = self.fe.m;
        pc.grf = self.grf;
        pc.nu = self.nu;
        pc
    }

    /// Rectangle `[x0, y0, x1, y1]` of the configured problem.
    pub fn domain(&self) -> [f64; 4] {
        self.problem.domain()
    }

    pub fn validate(&self) -> Result<()> {
        self.problem_config().validate()?;
        self.pod.target()?;
        if self.pod.n_pod == 0 {
            return Err(Error::InvalidInput("n_pod must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidInput("workers must be positive".into()));
        }
        if self.rates.levels.is_empty() || self.rates.levels.contains(&0) {
            return Err(Error::InvalidInput("rate levels must be positive".into()));
        }
        self.train.validate()
    }
}
