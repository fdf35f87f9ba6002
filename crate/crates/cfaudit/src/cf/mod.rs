//! Counterfactual generation and ranking.
//!
//! Given an origin row the model scored into the undesired class, a
//! generator proposes vectors the model scores into the desired class.
//! Two strategies exist: [`genetic_generate`] searches the unexplored
//! feature space, [`known_space_generate`] picks real rows from a
//! reference dataset. Both rank results by MAD-weighted distance;
//! [`rerank_by_boundary_score`] reorders a set by score closeness.

pub mod genetic;
pub mod known;

use serde::{Deserialize, Serialize};

use crate::data::{EncodedLayout, FeatureKind};
use crate::error::{Error, Result};
use crate::model::Classifier;

pub use genetic::{genetic_generate, FitnessWeights, GeneticParams};
pub use known::known_space_generate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Genetic,
    KnownSpace,
}

impl Provenance {
    /// The snake_case name used in configs, file paths, and report rows.
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Genetic => "genetic",
            Provenance::KnownSpace => "known_space",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityRule {
    /// Utility is the negated MAD distance: nearest first.
    MadDistance,
    /// Utility is the negated |score(x) - score(c)|: boundary-hugging first.
    BoundaryScore,
}

/// One candidate: an encoded vector plus its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    /// 1-based position in the owning set's current order.
    pub rank: usize,
    pub vector: Vec<f64>,
    pub valid: bool,
    /// MAD-weighted distance to the origin.
    pub distance: f64,
    /// Number of features whose value differs from the origin.
    pub sparsity: usize,
    /// Utility under the owning set's rule; non-increasing down the list.
    pub utility: f64,
    pub provenance: Provenance,
}

/// An ordered set of valid counterfactuals for one origin sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    /// Row index of the origin in the owning split, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_index: Option<usize>,
    pub origin: Vec<f64>,
    pub desired: u8,
    pub k_requested: usize,
    pub utility_rule: UtilityRule,
    pub items: Vec<Counterfactual>,
    /// Set when the generator legitimately produced nothing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl CounterfactualSet {
    pub fn empty(
        origin: Vec<f64>,
        desired: u8,
        k_requested: usize,
        diagnostic: impl Into<String>,
    ) -> Self {
        CounterfactualSet {
            origin_index: None,
            origin,
            desired,
            k_requested,
            utility_rule: UtilityRule::MadDistance,
            items: Vec::new(),
            diagnostic: Some(diagnostic.into()),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The same set truncated to its first `k` items, ranks preserved.
    pub fn truncated(&self, k: usize) -> CounterfactualSet {
        let mut out = self.clone();
        out.items.truncate(k);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn renumber(&mut self) {
        for (i, item) in self.items.iter_mut().enumerate() {
            item.rank = i + 1;
        }
    }
}

/// MAD-weighted distance: scalar features contribute |c - x| / MAD, each
/// categorical feature contributes 1 when the category differs.
pub fn mad_distance(x: &[f64], c: &[f64], layout: &EncodedLayout, mads: &[f64]) -> Result<f64> {
    if x.len() != layout.width() || c.len() != layout.width() || mads.len() != layout.width() {
        return Err(Error::Metric(format!(
            "layout width {} does not match vectors ({}, {}) and mads ({})",
            layout.width(),
            x.len(),
            c.len(),
            mads.len()
        )));
    }
    Ok(mad_distance_unchecked(x, c, layout, mads))
}

pub(crate) fn mad_distance_unchecked(
    x: &[f64],
    c: &[f64],
    layout: &EncodedLayout,
    mads: &[f64],
) -> f64 {
    let mut total = 0.0;
    for block in &layout.blocks {
        match block.kind {
            FeatureKind::Numeric | FeatureKind::Ordinal => {
                let i = block.start;
                total += (c[i] - x[i]).abs() / mads[i];
            }
            FeatureKind::Categorical => {
                if block.cols().any(|i| x[i] != c[i]) {
                    total += 1.0;
                }
            }
        }
    }
    total
}

/// Number of features (blocks) whose value differs between two vectors.
pub(crate) fn changed_features(x: &[f64], c: &[f64], layout: &EncodedLayout) -> usize {
    layout
        .blocks
        .iter()
        .filter(|b| b.cols().any(|i| x[i] != c[i]))
        .count()
}

/// Sort nearest-first by MAD distance. Stable, so equal distances keep
/// their input order.
pub fn rank_by_mad_distance(mut set: CounterfactualSet) -> CounterfactualSet {
    set.items
        .sort_by(|a, b| a.distance.partial_cmp(&b.distance).expect("finite distances"));
    for item in &mut set.items {
        item.utility = -item.distance;
    }
    set.utility_rule = UtilityRule::MadDistance;
    set.renumber();
    set
}

/// Reorder by closeness to the decision boundary: utility is the negated
/// absolute score difference to the origin, highest first. Stable.
pub fn rerank_by_boundary_score<C: Classifier + ?Sized>(
    model: &C,
    mut set: CounterfactualSet,
) -> CounterfactualSet {
    let origin_score = model.score(&set.origin);
    for item in &mut set.items {
        item.utility = -(origin_score - model.score(&item.vector)).abs();
    }
    set.items
        .sort_by(|a, b| b.utility.partial_cmp(&a.utility).expect("finite utilities"));
    set.utility_rule = UtilityRule::BoundaryScore;
    set.renumber();
    set
}
