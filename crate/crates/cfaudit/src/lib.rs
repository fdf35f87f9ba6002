//! Counterfactual fairness auditing for binary classifiers trained without
//! sensitive features.
//!
//! A decision model that never sees gender or race can still discriminate
//! through proxy features. This crate quantifies that behavior by generating
//! counterfactual explanations for negatively-decided individuals and
//! measuring how often those counterfactuals cross to the opposite
//! demographic group, as judged by a separately trained sensitive-feature
//! classifier.
//!
//! The pieces:
//!
//! - [`data`]: schema-driven CSV ingestion, one-hot encoding, stratified
//!   splitting, and dataset-level statistics.
//! - [`model`]: built-in binary classifiers (logistic regression, CART,
//!   MLP, covariance-penalized fair logistic regression) with grid-search
//!   cross-validated tuning.
//! - [`cf`]: counterfactual generation, with a genetic strategy over the
//!   unexplored feature space and a known-space nearest-neighbor strategy.
//! - [`metrics`]: the audit metrics. Counterfactual flip rates, discounted
//!   cumulative counterfactual fairness (a DCG-style rank-weighted score),
//!   group deltas, and the classical DSP/DEO/DAO measures.
//! - [`proxy`]: proxy-feature discovery via correlation between
//!   counterfactual perturbations and sensitive-score shifts.
//! - [`audit`]: end-to-end orchestration, report emission, and the
//!   counterfactual-count sweep.
//!
//! Per-sample generation and fold-level training fan out over a rayon pool
//! when the `parallel` feature (default) is enabled; disabling it yields a
//! fully sequential build with identical results.

pub mod audit;
pub mod cf;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod par;
pub mod proxy;
pub mod seed;

pub use error::{Error, Result};
