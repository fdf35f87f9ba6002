//! Built-in binary classifiers and their tuning/evaluation machinery.
//!
//! Four families are provided: logistic regression, CART, MLP, and a
//! covariance-penalized fair logistic regression. The audit itself only
//! needs the [`Classifier`] contract, so anything that scores an encoded
//! row into [0,1] can stand in for the built-ins.

pub mod eval;
pub mod linear;
pub mod mlp;
pub mod scale;
pub mod tree;
pub mod tune;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, EncodedLayout};
use crate::error::{Error, Result};

pub use eval::{auc_from_scores, evaluate, metrics_from_scores, EvalMetrics};
pub use linear::{
    logistic_loss_grad, sensitive_score_covariance, train_fair_logreg, train_logreg, FairHyper,
    LinearModel, LogregHyper,
};
pub use mlp::{mlp_loss_grad, train_mlp, MlpHyper, MlpModel};
pub use scale::Standardizer;
pub use tree::{train_tree, TreeHyper, TreeModel};
pub use tune::{grid_search_cv, stratified_fold_ids, CvReport, Objective};

/// Anything that scores one encoded row. `Sync` so scoring can fan out
/// across threads; trained models are immutable so this is free.
pub trait Classifier: Sync {
    /// Probability-like score in [0,1].
    fn score(&self, x: &[f64]) -> f64;

    /// Hard decision at the fixed 0.5 threshold.
    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.5)
    }

    /// Hash of the encoded layout the model was trained on.
    fn layout_hash(&self) -> u64;
}

/// Borrowed training inputs: encoded rows plus the label column for the
/// task at hand (the target for decision makers, a sensitive bit vector
/// for sensitive-feature classifiers).
#[derive(Clone, Copy)]
pub struct TrainView<'a> {
    pub x: &'a [Vec<f64>],
    pub labels: &'a [u8],
    pub layout: &'a EncodedLayout,
}

impl<'a> TrainView<'a> {
    /// Train against the dataset's target column.
    pub fn decision(data: &'a Dataset) -> TrainView<'a> {
        TrainView {
            x: &data.x,
            labels: &data.y,
            layout: &data.layout,
        }
    }

    /// Train against one sensitive attribute's bit column.
    pub fn sensitive(data: &'a Dataset, attr: usize) -> Result<TrainView<'a>> {
        let labels = data
            .s
            .get(attr)
            .ok_or_else(|| Error::Model(format!("no sensitive attribute #{attr}")))?;
        Ok(TrainView {
            x: &data.x,
            labels,
            layout: &data.layout,
        })
    }
}

/// A model family plus its hyperparameters; the unit a grid search ranges
/// over and the recipe stored inside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Logreg(LogregHyper),
    Tree(TreeHyper),
    Mlp(MlpHyper),
    FairLogreg(FairHyper),
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Logreg(_) => "logreg",
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::FairLogreg(_) => "fair_logreg",
        }
    }

    /// Train this spec. `sensitive` is consulted only by `fair_logreg`,
    /// which needs the group bits during training (never at inference).
    pub fn train(&self, view: &TrainView, sensitive: Option<&[u8]>) -> Result<TrainedModel> {
        let params = match self {
            ModelSpec::Logreg(h) => ModelParams::Linear(linear::train_logreg(view, h)?),
            ModelSpec::Tree(h) => ModelParams::Tree(tree::train_tree(view, h)?),
            ModelSpec::Mlp(h) => ModelParams::Mlp(mlp::train_mlp(view, h)?),
            ModelSpec::FairLogreg(h) => {
                let s = sensitive.ok_or_else(|| {
                    Error::Model("fair_logreg needs the sensitive vector at training".into())
                })?;
                ModelParams::Linear(linear::train_fair_logreg(view, s, h)?)
            }
        };
        Ok(TrainedModel {
            spec: self.clone(),
            params,
        })
    }
}

/// Learned parameters, tagged by representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearModel),
    Tree(TreeModel),
    Mlp(MlpModel),
}

/// A trained classifier: the spec that produced it plus learned parameters.
/// Serializes to a self-describing JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn family(&self) -> &'static str {
        self.spec.family()
    }

    /// Refuse inputs from a different encoding than the training one.
    pub fn ensure_layout(&self, layout: &EncodedLayout) -> Result<()> {
        if self.layout_hash() != layout.hash() {
            return Err(Error::Model(format!(
                "model was trained on layout {:016x} but data has layout {:016x}",
                self.layout_hash(),
                layout.hash()
            )));
        }
        Ok(())
    }

    /// Stable fingerprint of spec plus parameters; used to key caches.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Load a saved model. When `expect` is given, a layout mismatch is
    /// refused immediately instead of at first scoring.
    pub fn load_json(path: impl AsRef<Path>, expect: Option<&EncodedLayout>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedModel = serde_json::from_str(&text)?;
        if let Some(layout) = expect {
            model.ensure_layout(layout)?;
        }
        Ok(model)
    }
}

impl Classifier for TrainedModel {
    fn score(&self, x: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Linear(m) => m.score(x),
            ModelParams::Tree(m) => m.score(x),
            ModelParams::Mlp(m) => m.score(x),
        }
    }

    fn layout_hash(&self) -> u64 {
        match &self.params {
            ModelParams::Linear(m) => m.layout_hash,
            ModelParams::Tree(m) => m.layout_hash,
            ModelParams::Mlp(m) => m.layout_hash,
        }
    }
}
