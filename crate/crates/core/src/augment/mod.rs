//! Class balancing by SMOTE interpolation or by sampling a trained
//! autoencoder's latent space.
//!
//! Both augmenters leave the original rows first and untouched and tag the
//! appended rows with their [`Origin`](crate::datakit::Origin).

mod autoencoder;
mod smote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datakit::{Class, DataError, Dataset};
use crate::tensornet::NetError;

pub use autoencoder::{
    autoencoder_sample, balance_with_autoencoder, train_autoencoder, Autoencoder,
    AutoencoderConfig,
};
pub use smote::{smote, SmoteConfig, SmoteTarget};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("invalid augmentation configuration: {0}")]
    Config(String),
    #[error("minority class {class} has {count} rows; SMOTE needs at least 2 and more than k = {k}")]
    MinorityTooSmall { class: Class, count: usize, k: usize },
    #[error("class {0} does not occur in the data")]
    ClassAbsent(Class),
    #[error("autoencoder needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Network(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A dataset after augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmented {
    pub data: Dataset,
    /// The class that received synthetic rows.
    pub minority: Class,
    pub synthetic: usize,
    /// Set when the target was already met and `data` is the input unchanged.
    pub already_balanced: bool,
}

/// `(minority, majority)` classes and counts; ties pick `Low` as minority.
pub(crate) fn minority_of(data: &Dataset) -> ((Class, usize), (Class, usize)) {
    let (low, high) = data.class_counts();
    if high < low {
        ((Class::High, high), (Class::Low, low))
    } else {
        ((Class::Low, low), (Class::High, high))
    }
}
