//! Core algorithms for desk-scale uplift experimentation on deposit
//! recommendations.
//!
//! Everything in this crate is pure computation over in-memory data:
//!
//! - [`dataset`] — the `(X, T, Y)` experiment container, deterministic
//!   stratified splitting, and the canonical CSV text format.
//! - [`boost`] — a self-contained gradient-boosted tree learner (squared
//!   error, softmax cross-entropy, focal loss) used as the base model
//!   everywhere else.
//! - [`predictor`] — deposit-amount class prediction, the rolling-median
//!   heuristic baseline, and intensity-scaled recommendation triples.
//! - [`sim`] — a synthetic user population with known ground truth,
//!   including a Monte-Carlo CATE oracle.
//! - [`meta`] — S/T/X/R meta-learners producing per-treatment CATE
//!   estimates and the argmax policy rule.
//! - [`eval`] — ERUPT with bootstrap, uplift curves, AUUC, and per-arm
//!   guardrail metrics.
//! - [`search`] — randomized hyperparameter search over base-learner and
//!   meta-learner choices.
//!
//! The crate is `no_std` (with `alloc`); file IO, the CLI, and report
//! serialization live in the companion `uplift-lab` crate. All random
//! paths are keyed by explicit seeds and documented stream tags, so
//! identical inputs reproduce identical outputs byte for byte.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod boost;
pub mod csvfmt;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod meta;
pub mod money;
pub mod predictor;
pub mod rng;
pub mod search;
pub mod sim;
pub mod treatment;

pub use dataset::{ExperimentDataset, ExperimentRecord};
pub use features::FeatureSchema;
pub use money::Money;
pub use treatment::ArmId;
