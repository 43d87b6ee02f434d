//! Sparse precision-matrix recovery for every window and conversion to
//! partial-correlation graphs.
//!
//! Each window's matrix is solved with an ADMM graphical lasso ([`glasso_solve`]).
//! Windows are grouped into chunks of `chunk_size`; in [`LambdaMode::Auto`] every
//! chunk shares one penalty picked from a grid by extended BIC ([`select_lambda`]).

mod admm;
mod batch;
mod partial;
mod select;

use serde::{Deserialize, Serialize};

pub use admm::{
    glasso_objective, glasso_solve, kkt_residual, refit_on_support, GlassoSolution, EDGE_THRESHOLD,
};
pub use batch::{glasso_batch, PrecisionBatch};
pub use partial::{partial_correlation_graph, CIGraphSequence};
pub use select::{ebic, graph_ebic, select_lambda, EBIC_GAMMA};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.01, 0.05, 0.1, 0.2, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LambdaMode {
    Fixed(f64),
    #[default]
    Auto,
}

impl std::str::FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LambdaMode::Auto);
        }
        let value: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("lambda must be 'auto' or a number, got '{s}'")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativePenalty(value));
        }
        Ok(LambdaMode::Fixed(value))
    }
}

impl std::fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaMode::Fixed(v) => write!(f, "{v}"),
            LambdaMode::Auto => f.write_str("auto"),
        }
    }
}

impl Serialize for LambdaMode {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaMode::Fixed(v) => serializer.serialize_f64(*v),
            LambdaMode::Auto => serializer.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaMode {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) if v.is_finite() && v >= 0.0 => Ok(LambdaMode::Fixed(v)),
            Raw::Number(v) => Err(serde::de::Error::custom(format!("negative lambda {v}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Knobs for the per-window solver and the chunked batch driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub lambda_mode: LambdaMode,
    pub lambda_grid: Vec<f64>,
    /// ADMM iteration cap.
    pub max_iterations: usize,
    pub admm_penalty: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Windows sharing one penalty in auto mode.
    pub chunk_size: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            lambda_mode: LambdaMode::Auto,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            max_iterations: 200,
            admm_penalty: 1.0,
            abs_tol: 1e-5,
            rel_tol: 1e-4,
            chunk_size: 64,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if let Some(bad) = self
            .lambda_grid
            .iter()
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Config(format!(
                "lambda grid entry {bad} is not positive"
            )));
        }
        if let LambdaMode::Fixed(v) = self.lambda_mode {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::NegativePenalty(v));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("admm_penalty", self.admm_penalty),
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        Ok(())
    }
}
