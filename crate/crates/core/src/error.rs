use thiserror::Error;

use crate::augment::AugmentError;
use crate::datakit::DataError;
use crate::evalharness::EvalError;
use crate::explain::ExplainError;
use crate::kbann::KbannError;
use crate::rulelang::RuleError;
use crate::tensornet::NetError;

/// Any failure raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Kbann(#[from] KbannError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
