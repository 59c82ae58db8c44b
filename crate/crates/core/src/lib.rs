//! Knowledge-based neural networks for tabular learner modelling.
//!
//! The crate compiles propositional Horn-clause knowledge into the topology
//! and initial weights of a feed-forward network ([`kbann`]), refines it by
//! backpropagation ([`tensornet`]), extracts weighted threshold rules from the
//! trained network, and compares it against plain and augmentation-assisted
//! baselines ([`augment`], [`evalharness`]) on data with controllable
//! spurious correlations ([`datakit`]). LIME-style surrogate explanations live
//! in [`explain`].
//!
//! Data-parallel loops (cross-validation folds, per-instance explanations,
//! permutation repeats, model fan-out) go through [`par::Execution`], which
//! uses rayon when the `parallel` feature is enabled and falls back to a
//! sequential loop otherwise. Results never depend on the schedule.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cli;
pub mod datakit;
pub mod evalharness;
pub mod explain;
pub mod kbann;
pub mod par;
pub mod rulelang;
pub mod seed;
pub mod tensornet;

mod error;

pub use error::{Error, Result};
