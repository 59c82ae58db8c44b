//! Knowledge-based networks: rules in, initialized network out, and weighted
//! threshold rules back out after training.
//!
//! A rule set is mapped level by level. Inputs sit at level 0 and every head
//! one above its deepest antecedent. An antecedent that skips levels is
//! carried upward by relay units labelled `symbol@level`, so knowledge links
//! always join adjacent levels. Each level also receives
//! `extra_hidden_per_level` free units (`head1`, `head2`, …), and the root
//! feeds a two-unit softmax output (Low, High).

mod compile;
mod extract;
mod importance;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::compile;
pub use extract::{extract_rules, ExtractedRule, ExtractedRuleSet, Term};
pub use importance::{permutation_importance, permutation_importance_with};
pub use verify::{verify_compiled_logic, ACTIVATION_HIGH, ACTIVATION_LOW};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbannError {
    #[error("invalid compile configuration: {0}")]
    Config(String),
    #[error("rule symbol `{0}` is not a feature")]
    UnknownSymbol(String),
    #[error("rule head `{0}` clashes with a feature name")]
    HeadIsFeature(String),
    #[error("expected a single root, found {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("the rule set is empty")]
    NoRules,
    #[error("head `{0}` has several clauses; rewrite disjuncts first")]
    Disjuncts(String),
    #[error("expected exactly two classes, got {0}")]
    Classes(usize),
    #[error("the network has no unit labels; use `explain` for unlabeled models")]
    Unlabeled,
    #[error("dataset is empty")]
    EmptyData,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Activation of rule-derived hidden units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeActivation {
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileConfig {
    /// Magnitude of knowledge links.
    pub omega: f64,
    /// Half-width of the uniform init for non-knowledge links and of the
    /// noise added to every weight and bias.
    pub perturb_scale: f64,
    pub extra_hidden_per_level: usize,
    pub knowledge_activation: KnowledgeActivation,
    pub seed: u64,
    pub freeze_knowledge_links: bool,
}

/// Default knowledge-link magnitude. Large enough that chains of three
/// sigmoid levels stay beyond 0.85 / below 0.15 on boolean inputs.
pub const DEFAULT_OMEGA: f64 = 8.0;

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            omega: DEFAULT_OMEGA,
            perturb_scale: 0.01,
            extra_hidden_per_level: 3,
            knowledge_activation: KnowledgeActivation::Sigmoid,
            seed: 0,
            freeze_knowledge_links: false,
        }
    }
}

impl CompileConfig {
    pub fn validate(&self) -> Result<(), KbannError> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(KbannError::Config("omega must be positive".into()));
        }
        if !(self.perturb_scale >= 0.0 && self.perturb_scale.is_finite()) {
            return Err(KbannError::Config("perturb_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Relative spread within which incoming weights of one sign share a term.
pub const DEFAULT_GROUP_TOLERANCE: f64 = 0.1;

/// Label of the unit carrying `symbol` at `level`.
pub fn relay_label(symbol: &str, level: usize) -> String {
    format!("{symbol}@{level}")
}

/// Splits a relay label into its symbol.
pub fn relay_symbol(label: &str) -> Option<&str> {
    label.split_once('@').map(|(s, _)| s)
}

/// Whether `label` names a free hidden unit (`head1`, `head2`, …).
pub fn is_free_head(label: &str) -> bool {
    label
        .strip_prefix("head")
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}
