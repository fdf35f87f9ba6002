//! Fully-connected net: ReLU hidden layers, sigmoid output, cross-entropy
//! loss, seeded mini-batch SGD with step decay. No dropout, no early stop;
//! every run with the same seed produces bit-identical parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scale::{bce_from_logit, sigmoid, Standardizer};
use super::TrainView;
use crate::error::{Error, Result};

/// Learning rate halves every this many epochs.
const DECAY_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            hidden: vec![16],
            epochs: 300,
            learning_rate: 0.5,
            batch: 32,
            seed: 0,
        }
    }
}

/// One dense layer; `w` is row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    /// Layer widths, input first, final width 1.
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub scaler: Standardizer,
    pub layout_hash: u64,
}

impl MlpModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let xs = self.scaler.apply(x);
        sigmoid(forward_logit(&self.sizes, &self.layers, &xs))
    }

    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn layer_dims(sizes: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    sizes.windows(2).map(|w| (w[1], w[0]))
}

pub(super) fn init_layers(sizes: &[usize], seed: u64) -> Vec<Layer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layer_dims(sizes)
        .map(|(out, inp)| {
            let limit = (6.0 / (inp + out) as f64).sqrt();
            Layer {
                w: (0..out * inp).map(|_| rng.gen_range(-limit..limit)).collect(),
                b: vec![0.0; out],
            }
        })
        .collect()
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        out.extend_from_slice(&layer.w);
        out.extend_from_slice(&layer.b);
    }
    out
}

fn unflatten(sizes: &[usize], params: &[f64]) -> Vec<Layer> {
    let mut layers = Vec::new();
    let mut at = 0;
    for (out, inp) in layer_dims(sizes) {
        let w = params[at..at + out * inp].to_vec();
        at += out * inp;
        let b = params[at..at + out].to_vec();
        at += out;
        layers.push(Layer { w, b });
    }
    assert_eq!(at, params.len(), "parameter vector length mismatch");
    layers
}

/// Forward pass returning the output logit (pre-sigmoid).
fn forward_logit(sizes: &[usize], layers: &[Layer], x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    for (li, (out, inp)) in layer_dims(sizes).enumerate() {
        let layer = &layers[li];
        let mut next = vec![0.0; out];
        for o in 0..out {
            let mut z = layer.b[o];
            let row = &layer.w[o * inp..(o + 1) * inp];
            for (wv, av) in row.iter().zip(&a) {
                z += wv * av;
            }
            next[o] = if li + 1 == layers.len() { z } else { z.max(0.0) };
        }
        a = next;
    }
    a[0]
}

/// Mean cross-entropy loss and its gradient over a batch, as a flat vector
/// aligned with `flatten`. Public so finite-difference checks can probe it.
pub fn mlp_loss_grad(
    sizes: &[usize],
    params: &[f64],
    xs: &[Vec<f64>],
    labels: &[u8],
) -> (f64, Vec<f64>) {
    let layers = unflatten(sizes, params);
    let mut grads: Vec<Layer> = layer_dims(sizes)
        .map(|(out, inp)| Layer {
            w: vec![0.0; out * inp],
            b: vec![0.0; out],
        })
        .collect();
    let n = xs.len() as f64;
    let mut loss = 0.0;

    for (x, &label) in xs.iter().zip(labels) {
        let y = label as f64;
        // Forward, keeping activations and pre-activations per layer.
        let mut acts: Vec<Vec<f64>> = vec![x.clone()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        for (li, (out, inp)) in layer_dims(sizes).enumerate() {
            let layer = &layers[li];
            let a = &acts[li];
            let mut z = vec![0.0; out];
            for o in 0..out {
                let mut acc = layer.b[o];
                let row = &layer.w[o * inp..(o + 1) * inp];
                for (wv, av) in row.iter().zip(a) {
                    acc += wv * av;
                }
                z[o] = acc;
            }
            let act = if li + 1 == layers.len() {
                z.clone()
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            zs.push(z);
            acts.push(act);
        }
        let logit = acts.last().unwrap()[0];
        loss += bce_from_logit(logit, y) / n;

        // Backward.
        let mut delta = vec![(sigmoid(logit) - y) / n];
        for li in (0..layers.len()).rev() {
            let (out, inp) = (sizes[li + 1], sizes[li]);
            let a_prev = &acts[li];
            for o in 0..out {
                grads[li].b[o] += delta[o];
                let row = &mut grads[li].w[o * inp..(o + 1) * inp];
                for (g, av) in row.iter_mut().zip(a_prev) {
                    *g += delta[o] * av;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; inp];
                for o in 0..out {
                    let row = &layers[li].w[o * inp..(o + 1) * inp];
                    for (p, wv) in prev.iter_mut().zip(row) {
                        *p += delta[o] * wv;
                    }
                }
                for (p, z) in prev.iter_mut().zip(&zs[li - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }
    (loss, flatten(&grads))
}

pub fn train_mlp(view: &TrainView, hyper: &MlpHyper) -> Result<MlpModel> {
    super::linear::require_both_classes(view.labels)?;
    if hyper.hidden.iter().any(|&w| w == 0) {
        return Err(Error::Model("hidden layer widths must be at least 1".into()));
    }
    if hyper.batch == 0 {
        return Err(Error::Model("batch size must be at least 1".into()));
    }
    let scaler = Standardizer::fit(view.x, view.layout);
    let xs = scaler.apply_all(view.x);

    let mut sizes = vec![view.layout.width()];
    sizes.extend_from_slice(&hyper.hidden);
    sizes.push(1);

    let mut layers = init_layers(&sizes, hyper.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(
        hyper.seed,
        &[crate::seed::label("mlp_batches")],
    ));
    let mut order: Vec<usize> = (0..xs.len()).collect();

    for epoch in 0..hyper.epochs {
        let lr = hyper.learning_rate * 0.5f64.powi((epoch / DECAY_EVERY) as i32);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(hyper.batch) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<u8> = chunk.iter().map(|&i| view.labels[i]).collect();
            let params = flatten(&layers);
            let (loss, grad) = mlp_loss_grad(&sizes, &params, &bx, &by);
            epoch_loss += loss * bx.len() as f64;
            let updated: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - lr * g)
                .collect();
            layers = unflatten(&sizes, &updated);
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Model(format!(
                "non-finite training loss at epoch {epoch}"
            )));
        }
    }

    Ok(MlpModel {
        sizes,
        layers,
        scaler,
        layout_hash: view.layout.hash(),
    })
}
