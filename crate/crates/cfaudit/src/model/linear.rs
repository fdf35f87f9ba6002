//! Logistic regression, plain and with a sensitive-covariance penalty.
//! Full-batch gradient descent with backtracking so the recorded loss
//! trace never increases.

use serde::{Deserialize, Serialize};

use super::scale::{bce_from_logit, sigmoid, Standardizer};
use super::TrainView;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregHyper {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LogregHyper {
    fn default() -> Self {
        LogregHyper {
            l2: 1e-4,
            epochs: 400,
            learning_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairHyper {
    pub l2: f64,
    /// Budget c: the tolerated |cov(s, theta.x)|. Infinity turns the
    /// penalty off entirely.
    pub covariance_budget: f64,
    pub penalty_weight: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for FairHyper {
    fn default() -> Self {
        FairHyper {
            l2: 1e-4,
            covariance_budget: 0.0,
            penalty_weight: 10.0,
            epochs: 400,
            learning_rate: 1.0,
        }
    }
}

/// Sigmoid-of-linear scorer over standardized inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scaler: Standardizer,
    pub layout_hash: u64,
    /// Training loss at initialization and after each accepted epoch.
    pub loss_trace: Vec<f64>,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let xs = self.scaler.apply(x);
        sigmoid(self.logit_std(&xs))
    }

    fn logit_std(&self, xs: &[f64]) -> f64 {
        self.weights.iter().zip(xs).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Covariance penalty state shared by loss and gradient evaluation.
struct FairPenalty {
    /// s - mean(s), one entry per train row.
    centered: Vec<f64>,
    budget: f64,
    weight: f64,
}

/// Loss and gradient of the (optionally penalized) L2-regularized logistic
/// objective at (w, b). Public so finite-difference checks can probe it.
pub fn logistic_loss_grad(
    xs: &[Vec<f64>],
    labels: &[u8],
    w: &[f64],
    b: f64,
    l2: f64,
    fair: Option<(&[f64], f64, f64)>,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut cov = 0.0;

    for (i, row) in xs.iter().enumerate() {
        let z = w.iter().zip(row).map(|(wj, v)| wj * v).sum::<f64>() + b;
        let y = labels[i] as f64;
        loss += bce_from_logit(z, y);
        let dz = (sigmoid(z) - y) / n;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += dz * v;
        }
        gb += dz;
        if let Some((centered, _, _)) = fair {
            cov += centered[i] * z / n;
        }
    }
    loss /= n;

    for (g, wj) in gw.iter_mut().zip(w) {
        *g += l2 * wj;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();

    if let Some((centered, budget, weight)) = fair {
        let excess = cov.abs() - budget;
        if excess > 0.0 {
            loss += weight * excess * excess;
            let scale = 2.0 * weight * excess * cov.signum();
            let mut dcov = vec![0.0; w.len()];
            let mut dcov_b = 0.0;
            for (i, row) in xs.iter().enumerate() {
                let c = centered[i] / n;
                for (d, v) in dcov.iter_mut().zip(row) {
                    *d += c * v;
                }
                dcov_b += c;
            }
            for (g, d) in gw.iter_mut().zip(&dcov) {
                *g += scale * d;
            }
            gb += scale * dcov_b;
        }
    }
    (loss, gw, gb)
}

/// Gradient descent from zero init. A step that would raise the loss is
/// retried with a halved rate; training stops once the rate underflows.
fn descend(
    xs: &[Vec<f64>],
    labels: &[u8],
    l2: f64,
    epochs: usize,
    lr0: f64,
    fair: Option<FairPenalty>,
) -> (Vec<f64>, f64, Vec<f64>) {
    let width = xs.first().map_or(0, Vec::len);
    let mut w = vec![0.0; width];
    let mut b = 0.0;
    let mut lr = lr0;
    let fair_args = fair
        .as_ref()
        .map(|f| (f.centered.as_slice(), f.budget, f.weight));

    let (mut loss, mut gw, mut gb) = logistic_loss_grad(xs, labels, &w, b, l2, fair_args);
    let mut trace = vec![loss];

    for _ in 0..epochs {
        let mut accepted = false;
        while lr >= 1e-12 {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wj, g)| wj - lr * g).collect();
            let cand_b = b - lr * gb;
            let (cand_loss, cand_gw, cand_gb) =
                logistic_loss_grad(xs, labels, &cand_w, cand_b, l2, fair_args);
            if cand_loss <= loss + 1e-9 {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                gw = cand_gw;
                gb = cand_gb;
                trace.push(loss);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (w, b, trace)
}

pub fn train_logreg(view: &TrainView, hyper: &LogregHyper) -> Result<LinearModel> {
    require_both_classes(view.labels)?;
    let scaler = Standardizer::fit(view.x, view.layout);
    let xs = scaler.apply_all(view.x);
    let (weights, bias, loss_trace) =
        descend(&xs, view.labels, hyper.l2, hyper.epochs, hyper.learning_rate, None);
    Ok(LinearModel {
        weights,
        bias,
        scaler,
        layout_hash: view.layout.hash(),
        loss_trace,
    })
}

/// Logistic regression with a quadratic penalty pushing the empirical
/// covariance between the sensitive bit and the linear score inside the
/// budget. The sensitive vector is used here and nowhere at inference.
pub fn train_fair_logreg(view: &TrainView, s: &[u8], hyper: &FairHyper) -> Result<LinearModel> {
    require_both_classes(view.labels)?;
    if s.len() != view.x.len() {
        return Err(Error::Model(format!(
            "sensitive vector length {} does not match {} train rows",
            s.len(),
            view.x.len()
        )));
    }
    if s.iter().all(|&v| v == 0) || s.iter().all(|&v| v == 1) {
        return Err(Error::Model(
            "fair training needs both sensitive groups present".into(),
        ));
    }
    let mean = s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64;
    let fair = FairPenalty {
        centered: s.iter().map(|&v| v as f64 - mean).collect(),
        budget: hyper.covariance_budget,
        weight: hyper.penalty_weight,
    };
    let scaler = Standardizer::fit(view.x, view.layout);
    let xs = scaler.apply_all(view.x);
    let (weights, bias, loss_trace) =
        descend(&xs, view.labels, hyper.l2, hyper.epochs, hyper.learning_rate, Some(fair));
    Ok(LinearModel {
        weights,
        bias,
        scaler,
        layout_hash: view.layout.hash(),
        loss_trace,
    })
}

pub(crate) fn require_both_classes(labels: &[u8]) -> Result<()> {
    if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
        return Err(Error::Model(
            "training labels contain a single class".into(),
        ));
    }
    Ok(())
}

/// Empirical covariance between a bit vector and the model's linear score;
/// the quantity the fair penalty constrains. Raw (unstandardized) rows.
pub fn sensitive_score_covariance(model: &LinearModel, x: &[Vec<f64>], s: &[u8]) -> f64 {
    let n = x.len() as f64;
    let s_mean = s.iter().map(|&v| v as f64).sum::<f64>() / n;
    x.iter()
        .zip(s)
        .map(|(row, &si)| {
            let xs = model.scaler.apply(row);
            (si as f64 - s_mean) * model.logit_std(&xs)
        })
        .sum::<f64>()
        / n
}
