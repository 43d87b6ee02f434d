//! Pipeline configuration: a flat key/value TOML document.
//!
//! Every key is optional and falls back to [`PipelineConfig::default`];
//! unknown keys are rejected. Keys:
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `input` | path | none |
//! | `format` | `"generic-csv"` \| `"pamap2"` | `"generic-csv"` |
//! | `columns` | list of 0-based column indices | `[0, 1]` |
//! | `labels_column` | column index | none |
//! | `truth` | path to a `sample_index,label` CSV | none |
//! | `window` | samples (M) | 1000 |
//! | `stride` | samples (s) | 100 |
//! | `chunk_size` | windows per shared penalty | 64 |
//! | `lambda` | `"auto"` or a number | `"auto"` |
//! | `lambda_grid` | list of positive numbers | `[0.01, 0.05, 0.1, 0.2, 0.5]` |
//! | `max_iterations` | ADMM iteration cap | 200 |
//! | `admm_penalty`, `abs_tol`, `rel_tol` | ADMM parameters | 1.0, 1e-5, 1e-4 |
//! | `covariance` | `"correlation"` \| `"raw"` | `"correlation"` |
//! | `variance_floor` | number | 1e-8 |
//! | `metric` | `"signed-sum"` \| `"l1"` \| `"l2"` \| `"frobenius"` | `"signed-sum"` |
//! | `normalize` | bool, divide d2G by its max before thresholding | true |
//! | `threshold` | number in [0, 1] | 0.5 |
//! | `guard_z` | integer >= 1 | 5 |
//! | `guard_units` | `"samples"` \| `"batches"` | `"samples"` |
//! | `seed` | integer | 0 |
//! | `threads` | integer, 0 = all cores | 0 |
//! | `out` | output directory | `"tglad-out"` |
//! | `reference_accuracy` | number echoed into the summary | none |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationConfig, GuardUnits};
use crate::error::{Error, Result};
use crate::ingest::InputFormat;
use crate::recovery::{LambdaMode, SolverSettings, DEFAULT_LAMBDA_GRID};
use crate::trajectory::DistanceMetric;
use crate::windowing::{CovarianceKind, DEFAULT_VARIANCE_FLOOR};

pub const PRESET_PAMAP2: &str = include_str!("../presets/pamap2-paper.toml");
pub const PRESET_SYNTH: &str = include_str!("../presets/synth-default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub columns: Vec<usize>,
    pub labels_column: Option<usize>,
    pub truth: Option<PathBuf>,
    pub window: usize,
    pub stride: usize,
    pub chunk_size: usize,
    pub lambda: LambdaMode,
    pub lambda_grid: Vec<f64>,
    pub max_iterations: usize,
    pub admm_penalty: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub covariance: CovarianceKind,
    pub variance_floor: f64,
    pub metric: DistanceMetric,
    pub normalize: bool,
    pub threshold: f64,
    pub guard_z: usize,
    pub guard_units: GuardUnits,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub reference_accuracy: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let solver = SolverSettings::default();
        Self {
            input: None,
            format: InputFormat::GenericCsv,
            columns: vec![0, 1],
            labels_column: None,
            truth: None,
            window: 1000,
            stride: 100,
            chunk_size: solver.chunk_size,
            lambda: solver.lambda_mode,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            max_iterations: solver.max_iterations,
            admm_penalty: solver.admm_penalty,
            abs_tol: solver.abs_tol,
            rel_tol: solver.rel_tol,
            covariance: CovarianceKind::Correlation,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            metric: DistanceMetric::SignedSum,
            normalize: true,
            threshold: 0.5,
            guard_z: 5,
            guard_units: GuardUnits::Samples,
            seed: 0,
            threads: 0,
            out: PathBuf::from("tglad-out"),
            reference_accuracy: None,
        }
    }
}

impl PipelineConfig {
    /// Parses a config document; missing keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Built-in presets: `pamap2-paper` and `synth-default`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "pamap2-paper" => Self::from_toml_str(PRESET_PAMAP2),
            "synth-default" => Self::from_toml_str(PRESET_SYNTH),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            lambda_mode: self.lambda,
            lambda_grid: self.lambda_grid.clone(),
            max_iterations: self.max_iterations,
            admm_penalty: self.admm_penalty,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            chunk_size: self.chunk_size,
        }
    }

    pub fn allocation(&self) -> AllocationConfig {
        AllocationConfig {
            threshold: self.threshold,
            guard_z: self.guard_z,
            guard_units: self.guard_units,
            window: self.window,
            stride: self.stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.len() < 2 {
            return Err(Error::TooFewVariables(self.columns.len()));
        }
        if self.window < 2 {
            return Err(Error::Config("window must be at least 2 samples".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.variance_floor.is_finite() && self.variance_floor >= 0.0) {
            return Err(Error::Config("variance_floor must be >= 0".into()));
        }
        if self.threshold > 1.0 && self.normalize {
            return Err(Error::Config(format!(
                "threshold {} exceeds 1 on a normalized signal",
                self.threshold
            )));
        }
        self.solver_settings().validate()?;
        self.allocation().validate()
    }
}
