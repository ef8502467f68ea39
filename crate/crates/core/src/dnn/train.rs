use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::relu_in_place;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's batches, measured before each update.
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn zero_grads(net: &NetworkSpec) -> Vec<LayerGrad> {
    net.layers
        .iter()
        .map(|l| LayerGrad {
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.bias.len()],
        })
        .collect()
}

/// Forward + backward for one sample, adding its gradient into `grads`.
/// Returns `(cross-entropy, predicted class)`.
fn accumulate_sample(net: &NetworkSpec, x: &[f64], label: usize, grads: &mut [LayerGrad]) -> (f64, usize) {
    let last = net.layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let input = if l == 0 { x } else { &acts[l - 1] };
        let mut z = vec![0.0; layer.out_len()];
        layer.affine(input, &mut z);
        if l != last {
            relu_in_place(&mut z);
        }
        acts.push(z);
    }

    let logits = &acts[last];
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = -(exps[label] / sum).ln();
    let predicted = super::argmax(logits);

    let mut delta: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    delta[label] -= 1.0;

    for l in (0..=last).rev() {
        let layer = &net.layers[l];
        let input = if l == 0 { x } else { &acts[l - 1] };
        let g = &mut grads[l];
        if l == 0 {
            layer.backward(input, &delta, &mut g.weights, &mut g.bias, None);
        } else {
            let mut din = vec![0.0; layer.in_len()];
            layer.backward(input, &delta, &mut g.weights, &mut g.bias, Some(&mut din));
            for (d, &a) in din.iter_mut().zip(&acts[l - 1]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = din;
        }
    }
    (loss, predicted)
}

/// Mean cross-entropy over `indices` and its gradient with respect to every
/// weight and bias.
pub fn batch_gradient(net: &NetworkSpec, data: &Dataset, indices: &[usize]) -> (f64, Vec<LayerGrad>) {
    let mut grads = zero_grads(net);
    let mut loss = 0.0;
    for &i in indices {
        loss += accumulate_sample(net, data.sample(i), data.labels[i] as usize, &mut grads).0;
    }
    let scale = 1.0 / indices.len() as f64;
    for g in &mut grads {
        g.weights.iter_mut().chain(g.bias.iter_mut()).for_each(|v| *v *= scale);
    }
    (loss * scale, grads)
}

pub fn cross_entropy(net: &NetworkSpec, data: &Dataset, indices: &[usize]) -> f64 {
    let total: f64 = indices
        .iter()
        .map(|&i| {
            let acts = super::forward_unchecked(net, data.sample(i));
            let logits = acts.last().unwrap();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            lse - logits[data.labels[i] as usize]
        })
        .sum();
    total / indices.len() as f64
}

/// Mini-batch SGD on softmax cross-entropy. Deterministic for a given seed.
pub fn train(net: &NetworkSpec, data: &Dataset, cfg: &TrainConfig) -> Result<(NetworkSpec, Vec<EpochLog>)> {
    net.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != net.input_len() {
        return Err(Error::ShapeMismatch {
            expected: net.input_len(),
            actual: data.dim(),
        });
    }
    if cfg.batch_size == 0 || cfg.batch_size > data.len() {
        return Err(Error::Config(format!(
            "batch size {} must lie in 1..={}",
            cfg.batch_size,
            data.len()
        )));
    }
    if data.num_classes() > net.output_len() {
        return Err(Error::Config(format!(
            "dataset has {} classes but the network has {} outputs",
            data.num_classes(),
            net.output_len()
        )));
    }
    if !(cfg.learning_rate >= 0.0) {
        return Err(Error::Config("learning rate must be non-negative".into()));
    }

    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = zero_grads(&net);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            for g in &mut grads {
                g.weights.fill(0.0);
                g.bias.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &i in chunk {
                let label = data.labels[i] as usize;
                let (loss, pred) = accumulate_sample(&net, data.sample(i), label, &mut grads);
                batch_loss += loss;
                correct += usize::from(pred == label);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            loss_sum += batch_loss;
            let step = cfg.learning_rate / chunk.len() as f64;
            for (layer, g) in net.layers.iter_mut().zip(&grads) {
                for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w -= step * gw;
                }
                for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                    *b -= step * gb;
                }
            }
        }
        history.push(EpochLog {
            epoch,
            loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok((net, history))
}
