//! Held-out evaluation at the fixed 0.5 threshold.

use serde::{Deserialize, Serialize};

use super::{Classifier, TrainedModel};
use crate::data::EncodedLayout;
use crate::error::{Error, Result};

/// Test-set metrics. `auc` is `None` when the test labels are one-class,
/// where the rank statistic is undefined; thresholded metrics still apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub auc: Option<f64>,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Area under the ROC curve via the rank statistic, ties averaged.
/// `None` when either class is absent.
pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Average ranks across tied score runs (1-based ranks).
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }

    let pos_rank_sum: f64 = labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y == 1)
        .map(|(i, _)| ranks[i])
        .sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Confusion metrics from scores. Zero denominators collapse to 0 rather
/// than NaN so reports stay arithmetic-safe.
pub fn metrics_from_scores(scores: &[f64], labels: &[u8]) -> EvalMetrics {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fno = 0usize;
    for (score, &y) in scores.iter().zip(labels) {
        let pred = u8::from(*score >= 0.5);
        match (pred, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fno += 1,
            _ => unreachable!(),
        }
    }
    let total = labels.len() as f64;
    let acc = (tp + tn) as f64 / total;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fno > 0 {
        tp as f64 / (tp + fno) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalMetrics {
        auc: auc_from_scores(scores, labels),
        acc,
        precision,
        recall,
        f1,
    }
}

/// Score a model over test rows and compute all metrics. Refuses data whose
/// encoded layout differs from the one the model was trained on.
pub fn evaluate(
    model: &TrainedModel,
    x: &[Vec<f64>],
    labels: &[u8],
    layout: &EncodedLayout,
) -> Result<EvalMetrics> {
    if x.is_empty() {
        return Err(Error::Metric("evaluation needs a non-empty test set".into()));
    }
    if x.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} rows vs {} labels",
            x.len(),
            labels.len()
        )));
    }
    model.ensure_layout(layout)?;
    let scores: Vec<f64> = x.iter().map(|row| model.score(row)).collect();
    Ok(metrics_from_scores(&scores, labels))
}
