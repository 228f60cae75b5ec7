//! Exact machine unlearning for neural propensity-score models.
//!
//! The crate trains a small feed-forward classifier that predicts treatment
//! assignment from covariates, removes a forget set chosen either by
//! propensity-matched pairs or by stratified random sampling, retrains from
//! scratch on the retain set, and compares the resulting models.
//!
//! Module map:
//!
//! - [`dataset`]: CSV ingestion and z-scoring.
//! - [`model`]: the propensity network, BCE loss, backprop and Adam.
//! - [`matching`]: scoring, nearest-neighbour pairing and forget/retain partitions.
//! - [`evaluation`]: RMSE, histograms, KDE and overlap coefficients.
//! - [`pipeline`]: the three-model experiment and ATT estimation.
//! - [`checkpoint`] / [`json`]: on-disk formats.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod json;
pub mod matching;
pub mod matrix;
pub mod model;
pub mod pipeline;

pub use dataset::{fit_standardizer, load_dataset, read_dataset, Dataset, Schema, Standardizer};
pub use error::{Error, ErrorKind, Result};
pub use evaluation::{EvalReport, Histogram, KdeCurve};
pub use matching::{MatchedPair, Partition, Strategy};
pub use matrix::Matrix;
pub use model::{ArchitectureSpec, ModelParams, TrainConfig};
pub use pipeline::{estimate_att, run_pipeline, PipelineConfig, PipelineResult};
