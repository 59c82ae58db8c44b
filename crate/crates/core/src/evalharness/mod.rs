//! Metrics, correlation probes and the four-model comparison.

mod comparison;
mod correlation;
mod metrics;

use thiserror::Error;

use crate::augment::AugmentError;
use crate::datakit::DataError;
use crate::kbann::KbannError;
use crate::rulelang::RuleError;
use crate::tensornet::NetError;

pub use comparison::{
    fit_baseline, fit_nsai, render_report, run_comparison, ComparisonConfig, CvSummary,
    ExperimentReport, ModelConfig, ModelKind, ModelReport, training_source,
};
pub use correlation::{correlation_table, CorrelationCell, CorrelationTable};
pub use metrics::{compute_metrics, evaluate, predict_classes, Metrics};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {truth} labels")]
    Length { predictions: usize, truth: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("invalid comparison configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Kbann(#[from] KbannError),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Data(#[from] DataError),
}
