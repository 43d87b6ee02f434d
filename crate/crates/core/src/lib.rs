//! Multivariate time-series segmentation through temporal conditional-independence graphs.
//!
//! The pipeline slides a window over a `D`-variable series, recovers a sparse
//! precision matrix for every window with the graphical lasso, converts each one
//! into a partial-correlation graph, and tracks how consecutive graphs move. Sharp
//! changes in the second-order distance between graphs mark segment boundaries,
//! and an allocation pass turns those spikes into per-window activity labels.
//!
//! Stages, in pipeline order:
//!
//! - [`ingest`]: delimited file loading, forward-fill imputation, ground truth.
//! - [`windowing`]: strided windows and per-window correlation matrices.
//! - [`recovery`]: ADMM graphical lasso, chunk-shared penalty selection, partial correlations.
//! - [`trajectory`]: first and second order graph distance sequences.
//! - [`allocation`]: thresholding and guard-band labeling.
//! - [`eval`] and [`synth`]: accuracy scoring and piecewise-Gaussian fixtures.
//! - [`pipeline`]: end-to-end orchestration, artifact files, scaling benchmark.

pub mod allocation;
pub mod config;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod recovery;
pub mod synth;
pub mod trajectory;
pub mod windowing;

pub use error::{Error, Result};
