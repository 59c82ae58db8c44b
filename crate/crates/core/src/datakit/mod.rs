//! Tabular datasets with a binary `Final_score` label, min-max scaling,
//! stratified splitting and a synthetic generator for the game-log schema.

mod csvio;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensornet::Samples;

pub use csvio::{load_csv, read_csv, save_csv, write_csv};
pub use synth::{generate_synthetic, FeatureRange, SynthConfig, Synthetic};

/// Name of the label column in CSV files.
pub const LABEL_COLUMN: &str = "Final_score";

/// The nine game-log features, in schema order.
pub const FEATURES: [&str; 9] = [
    "Arrow",
    "Big_cheese",
    "Small_cheese",
    "Function",
    "Debug",
    "Simulation",
    "Loop",
    "Conditional",
    "Hitting_wall",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown label `{token}` (expected High/Low/True/False)")]
    UnknownLabel { line: usize, token: String },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("infeasible correlation: {0}")]
    Infeasible(String),
}

/// Binary class label. `High` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    Low,
    High,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Low, Class::High];

    /// Output-unit index: Low = 0, High = 1.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Class {
        if i == 0 {
            Class::Low
        } else {
            Class::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Low => "Low",
            Class::High => "High",
        }
    }

    pub fn names() -> Vec<String> {
        Class::ALL.iter().map(|c| c.as_str().to_string()).collect()
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim() {
            "High" | "True" => Ok(Class::High),
            "Low" | "False" => Ok(Class::Low),
            _ => Err(()),
        }
    }
}

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Smote,
    Autoencoder,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Real => "real",
            Origin::Smote => "smote",
            Origin::Autoencoder => "autoencoder",
        }
    }
}

impl FromStr for Origin {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim() {
            "real" => Ok(Origin::Real),
            "smote" => Ok(Origin::Smote),
            "autoencoder" => Ok(Origin::Autoencoder),
            _ => Err(()),
        }
    }
}

/// Per-feature min/max used for min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Bounds {
    pub fn of_rows(rows: &[Vec<f64>], width: usize) -> Bounds {
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            for (j, v) in row.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        if rows.is_empty() {
            min.fill(0.0);
            max.fill(0.0);
        }
        Bounds { min, max }
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// `(x - min) / (max - min)`, or 0 for a constant feature.
    pub fn scale(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (v - self.min[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Inverse of [`Bounds::scale`] (constant features map back to their value).
    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| self.min[j] + v * (self.max[j] - self.min[j]))
            .collect()
    }
}

/// Named numeric feature columns plus a binary label.
///
/// `normalization` holds the bounds observed in the raw data;
/// `scaled_with` is set once rows have been min-max scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Class>,
    normalization: Bounds,
    scaled_with: Option<Bounds>,
    origin: Option<Vec<Origin>>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Class>,
    ) -> Result<Dataset, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = feature_names.len();
        if d == 0 {
            return Err(DataError::Invalid("no feature columns".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(DataError::Invalid(format!(
                "row {i} has {} values, expected {d}",
                rows[i].len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite value".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(DataError::Invalid(format!("duplicate feature `{dup}`")));
        }
        let normalization = Bounds::of_rows(&rows, d);
        Ok(Dataset {
            feature_names,
            rows,
            labels,
            normalization,
            scaled_with: None,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: Vec<Origin>) -> Result<Dataset, DataError> {
        if origin.len() != self.rows.len() {
            return Err(DataError::Invalid("origin column length".into()));
        }
        self.origin = Some(origin);
        Ok(self)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn origin(&self) -> Option<&[Origin]> {
        self.origin.as_deref()
    }

    /// Bounds observed in the raw (unscaled) data.
    pub fn normalization(&self) -> &Bounds {
        &self.normalization
    }

    /// Bounds the rows are currently scaled with, if any.
    pub fn scaled_with(&self) -> Option<&Bounds> {
        self.scaled_with.as_ref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize, DataError> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| DataError::UnknownFeature(name.to_string()))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Label encoded Low → 0, High → 1.
    pub fn label_indicator(&self) -> Vec<f64> {
        self.labels.iter().map(|c| c.index() as f64).collect()
    }

    /// (Low count, High count).
    pub fn class_counts(&self) -> (usize, usize) {
        let high = self.labels.iter().filter(|c| **c == Class::High).count();
        (self.labels.len() - high, high)
    }

    pub fn count(&self, class: Class) -> usize {
        self.labels.iter().filter(|c| **c == class).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            normalization: self.normalization.clone(),
            scaled_with: self.scaled_with.clone(),
            origin: self
                .origin
                .as_ref()
                .map(|o| idx.iter().map(|&i| o[i]).collect()),
        }
    }

    /// Appends rows in the same feature space, tagging them with `origin`.
    /// Existing rows become `real` if they had no tag.
    pub fn extend(&mut self, rows: Vec<Vec<f64>>, labels: Vec<Class>, origin: Origin) -> Result<(), DataError> {
        if rows.len() != labels.len() || rows.iter().any(|r| r.len() != self.n_features()) {
            return Err(DataError::Invalid("appended rows do not match the schema".into()));
        }
        let tags = self.origin.get_or_insert_with(|| vec![Origin::Real; self.rows.len()]);
        tags.extend(std::iter::repeat_n(origin, rows.len()));
        self.rows.extend(rows);
        self.labels.extend(labels);
        Ok(())
    }

    /// Rows in the original units, undoing any scaling.
    pub fn raw_rows(&self) -> Vec<Vec<f64>> {
        match &self.scaled_with {
            Some(b) => self.rows.iter().map(|r| b.invert(r)).collect(),
            None => self.rows.clone(),
        }
    }

    /// Network samples with one-hot (Low, High) targets.
    pub fn to_samples(&self) -> Samples {
        let classes: Vec<usize> = self.labels.iter().map(|c| c.index()).collect();
        Samples::one_hot(self.rows.clone(), &classes, 2).expect("rows and labels align")
    }
}

/// Min-max scales `data` with its own bounds.
pub fn normalize(data: &Dataset) -> Dataset {
    let raw = data.raw_rows();
    let bounds = Bounds::of_rows(&raw, data.n_features());
    apply_normalization(data, &bounds)
}

/// Min-max scales `data` with `bounds` (typically the training set's).
/// Values outside the bounds are not clipped. Applying the same bounds twice
/// is the same as applying them once.
pub fn apply_normalization(data: &Dataset, bounds: &Bounds) -> Dataset {
    if data.scaled_with.as_ref() == Some(bounds) {
        return data.clone();
    }
    let raw = data.raw_rows();
    let mut out = data.clone();
    out.rows = raw.iter().map(|r| bounds.scale(r)).collect();
    out.scaled_with = Some(bounds.clone());
    out
}

fn shuffled_by_class(labels: &[Class], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); 2];
    for (i, c) in labels.iter().enumerate() {
        groups[c.index()].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups
}

/// Training and held-out row indices of one fold.
pub type Fold = (Vec<usize>, Vec<usize>);

/// Stratified k-fold partitions as `(train, validation)` index lists.
///
/// Each class is shuffled and dealt round-robin into the folds, continuing
/// the rotation across classes, so fold sizes differ by at most one and each
/// fold's class counts are within one of the global proportion.
pub fn kfold_split(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>, DataError> {
    if k < 2 {
        return Err(DataError::Config("k must be at least 2".into()));
    }
    if k > data.len() {
        return Err(DataError::Config(format!(
            "k = {k} exceeds the {} available rows",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for group in shuffled_by_class(&data.labels, &mut rng) {
        for i in group {
            folds[next % k].push(i);
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let mut val = folds[f].clone();
            val.sort_unstable();
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            (train, val)
        })
        .collect())
}

/// Seeded stratified split; returns `(train, test)`.
pub fn train_test_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Config("test_fraction must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for group in shuffled_by_class(&data.labels, &mut rng) {
        let k = (group.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&group[..k]);
        train.extend_from_slice(&group[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Config("split leaves an empty side".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Point-biserial correlation of every feature with the label.
pub fn label_correlations(data: &Dataset) -> BTreeMap<String, Option<f64>> {
    let y = data.label_indicator();
    data.feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), pearson(&data.column(j), &y)))
        .collect()
}
