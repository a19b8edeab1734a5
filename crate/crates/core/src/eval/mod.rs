//! Metrics, chronological splits, predictor evaluation, workloads and the
//! experiment drivers.

mod baseline_run;
pub mod experiments;
mod manifest;
mod metrics;
mod ncf;
pub mod svm;
pub mod workloads;

use thiserror::Error;

use crate::baselines::MlpError;
use crate::encode::EncodeError;
use crate::ggnn::GgnnError;
use crate::tracer::TraceError;

pub use baseline_run::{run_address_predictor, run_branch_predictor, run_mlp_branch, gpr_features, PredictorKind};
pub use manifest::{fingerprint, RunManifest};
pub use metrics::{complete_accuracy, mpki, split_trace, EvalReport, Outcome, PredictionRecord, ReportRow};
pub use ncf::{fit_encoding, labeled_samples, NcfConfig, NcfModel, TaskGraphs, Workload, DEFAULT_RADIUS};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("trace has no events")]
    EmptyTrace,
    #[error("instruction count is zero")]
    ZeroInstructions,
    #[error("{predicted} predictions for {labels} labels")]
    LengthMismatch { predicted: usize, labels: usize },
    #[error("no labels to score")]
    NoLabels,
    #[error("need at least two classes")]
    SingleClass,
    #[error("{0}")]
    Invalid(String),
    #[error("encoding: {0}")]
    Encode(#[from] EncodeError),
    #[error("model: {0}")]
    Model(String),
    #[error("mlp: {0}")]
    Mlp(#[from] MlpError),
    #[error("trace: {0}")]
    Trace(String),
}

impl From<GgnnError> for EvalError {
    fn from(e: GgnnError) -> Self {
        EvalError::Model(e.to_string())
    }
}

impl From<TraceError> for EvalError {
    fn from(e: TraceError) -> Self {
        EvalError::Trace(e.to_string())
    }
}
