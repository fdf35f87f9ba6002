//! Grid search with stratified k-fold cross-validation.

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::eval::{auc_from_scores, metrics_from_scores};
use super::{Classifier, ModelSpec, TrainView, TrainedModel};
use crate::error::{Error, Result};
use crate::{par, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Rank-based area under the ROC curve; the decision-maker criterion.
    Auc,
    /// F1 at threshold 0.5; the sensitive-classifier criterion.
    F1,
}

/// Everything the search measured. `fold_scores[a][f]` is assignment `a`
/// scored on held-out fold `f`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<ModelSpec>,
    pub objective: Objective,
    pub folds: usize,
    pub fold_scores: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub winner: usize,
}

/// Label-stratified fold assignment. Each class is shuffled and dealt
/// round-robin; classes start dealing at staggered folds so fold sizes
/// stay within one row of each other.
pub fn stratified_fold_ids(labels: &[u8], folds: usize, fold_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(fold_seed, &[seed::label("cv_folds")]));
    let mut ids = vec![0usize; labels.len()];
    let mut start = 0usize;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (j, &row) in members.iter().enumerate() {
            ids[row] = (start + j) % folds;
        }
        start = (start + members.len()) % folds;
    }
    ids
}

struct Fold {
    train_x: Vec<Vec<f64>>,
    train_labels: Vec<u8>,
    train_s: Option<Vec<u8>>,
    val_x: Vec<Vec<f64>>,
    val_labels: Vec<u8>,
}

/// Evaluate every grid assignment with k-fold cross-validation, then retrain
/// the winner on the full view. Ties go to the lower assignment index.
/// Assignment-fold pairs train in parallel; results are order-deterministic.
pub fn grid_search_cv(
    view: &TrainView,
    sensitive: Option<&[u8]>,
    grid: &[ModelSpec],
    folds: usize,
    objective: Objective,
    cv_seed: u64,
) -> Result<(TrainedModel, CvReport)> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let n = view.x.len();
    if n < 2 * folds {
        return Err(Error::Data(format!(
            "{n} rows cannot support {folds}-fold validation"
        )));
    }
    for class in [0u8, 1] {
        let count = view.labels.iter().filter(|&&y| y == class).count();
        if count < folds {
            return Err(Error::Data(format!(
                "class {class} has {count} rows, fewer than {folds} folds"
            )));
        }
    }
    if let Some(s) = sensitive {
        if s.len() != n {
            return Err(Error::Model(format!(
                "sensitive vector length {} does not match {n} rows",
                s.len()
            )));
        }
    }

    let ids = stratified_fold_ids(view.labels, folds, cv_seed);
    let fold_data: Vec<Fold> = (0..folds)
        .map(|f| {
            let (mut train_x, mut train_labels, mut val_x, mut val_labels) =
                (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            let mut train_s = sensitive.map(|_| Vec::new());
            for i in 0..n {
                if ids[i] == f {
                    val_x.push(view.x[i].clone());
                    val_labels.push(view.labels[i]);
                } else {
                    train_x.push(view.x[i].clone());
                    train_labels.push(view.labels[i]);
                    if let (Some(acc), Some(s)) = (train_s.as_mut(), sensitive) {
                        acc.push(s[i]);
                    }
                }
            }
            Fold {
                train_x,
                train_labels,
                train_s,
                val_x,
                val_labels,
            }
        })
        .collect();

    let jobs = grid.len() * folds;
    let layout = view.layout;
    let scores: Vec<Result<f64>> = par::map_indexed(jobs, |job| {
        let (ai, fi) = (job / folds, job % folds);
        let fold = &fold_data[fi];
        let fold_view = TrainView {
            x: &fold.train_x,
            labels: &fold.train_labels,
            layout,
        };
        let model = grid[ai].train(&fold_view, fold.train_s.as_deref())?;
        let val_scores: Vec<f64> = fold.val_x.iter().map(|row| model.score(row)).collect();
        match objective {
            Objective::Auc => auc_from_scores(&val_scores, &fold.val_labels).ok_or_else(|| {
                Error::Metric(format!("validation fold {fi} has a single class"))
            }),
            Objective::F1 => Ok(metrics_from_scores(&val_scores, &fold.val_labels).f1),
        }
    });

    let mut fold_scores = vec![vec![0.0; folds]; grid.len()];
    for (job, value) in scores.into_iter().enumerate() {
        fold_scores[job / folds][job % folds] = value?;
    }

    let mut mean = Vec::with_capacity(grid.len());
    let mut std = Vec::with_capacity(grid.len());
    for row in &fold_scores {
        let m = row.iter().sum::<f64>() / folds as f64;
        let v = row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / folds as f64;
        mean.push(m);
        std.push(v.sqrt());
    }
    let mut winner = 0;
    for (i, &m) in mean.iter().enumerate() {
        if m > mean[winner] {
            winner = i;
        }
    }

    let model = grid[winner].train(view, sensitive)?;
    Ok((
        model,
        CvReport {
            grid: grid.to_vec(),
            objective,
            folds,
            fold_scores,
            mean,
            std,
            winner,
        },
    ))
}
