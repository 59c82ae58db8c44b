//! LIME-style local surrogates for any two-class probability model, their
//! dataset-wide averages, and reports on misclassified rows.
//!
//! Perturbations are Gaussian around the instance in units of each feature's
//! standard deviation; the surrogate is a weighted linear fit to P(High) over
//! those standardized offsets, so an importance is "change in P(High) per
//! standard deviation".

mod lime;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datakit::{Class, Dataset};
use crate::tensornet::{NetError, Network};

pub use lime::{explain_rows, global_explain, lime_explain, solve_weighted_least_squares};
pub use report::{misprediction_report, misprediction_table, write_misprediction_csv, Misprediction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("invalid explanation settings: {0}")]
    Config(String),
    #[error("model output is not a two-class distribution (sum {sum})")]
    NotProbabilities { sum: f64 },
    #[error("weighted design matrix is singular even with ridge damping")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dataset is empty")]
    EmptyData,
    #[error(transparent)]
    Network(#[from] NetError),
}

/// Anything that maps a feature vector to (Low, High) probabilities.
pub trait ProbaModel: Sync {
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ExplainError>;
}

impl ProbaModel for Network {
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ExplainError> {
        Ok(self.predict(x)?)
    }
}

impl<F> ProbaModel for F
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ExplainError> {
        Ok(self(x))
    }
}

/// Per-feature mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DataStats {
    pub fn of(data: &Dataset) -> DataStats {
        let n = data.len().max(1) as f64;
        let d = data.n_features();
        let mean: Vec<f64> = (0..d).map(|j| data.rows().iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| (data.rows().iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        DataStats {
            feature_names: data.feature_names().to_vec(),
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Defaults to `0.75 · sqrt(#features)`.
    pub kernel_width: Option<f64>,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 1000,
            kernel_width: None,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.n_samples < 50 {
            return Err(ExplainError::Config("n_samples must be at least 50".into()));
        }
        if let Some(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(ExplainError::Config("kernel_width must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn kernel_width_for(&self, n_features: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (n_features as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub value: f64,
    pub importance: f64,
}

impl std::fmt::Display for Contribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = (Val={}, Imp={:.3})", self.feature, self.value, self.importance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub instance_id: usize,
    pub predicted: Class,
    pub true_label: Option<Class>,
    /// Model probabilities, indexed by [`Class::index`] (Low, High).
    pub confidence: [f64; 2],
    /// Every feature once, by decreasing |importance|.
    pub contributions: Vec<Contribution>,
    pub intercept: f64,
    /// Set when the fit needed ridge damping.
    pub damped: bool,
}

impl Explanation {
    pub fn importance_of(&self, feature: &str) -> Option<f64> {
        self.contributions.iter().find(|c| c.feature == feature).map(|c| c.importance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub feature: String,
    pub mean_importance: f64,
    pub mean_abs_importance: f64,
}

/// Averages of local importances, one entry per feature in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalExplanation {
    pub n_instances: usize,
    pub features: Vec<GlobalImportance>,
}

impl GlobalExplanation {
    pub fn get(&self, feature: &str) -> Option<&GlobalImportance> {
        self.features.iter().find(|g| g.feature == feature)
    }
}
