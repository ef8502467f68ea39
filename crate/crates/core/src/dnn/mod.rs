//! The source ReLU network: construction, forward pass, training and the
//! activation statistics that drive conversion and kernel optimization.

mod stats;
mod train;

pub use stats::{record_stats, ActivationStats, LayerStats, Normalization, ValueHistogram, HISTOGRAM_BINS};
pub use train::{batch_gradient, cross_entropy, train, EpochLog, LayerGrad, TrainConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layer::{ConvGeometry, LayerSpec};
use crate::network::{KernelParams, NetworkSpec};

/// Post-ReLU activations of every hidden layer followed by the raw logits of
/// the last layer.
pub fn forward(net: &NetworkSpec, input: &[f64]) -> Result<Vec<Vec<f64>>> {
    if input.len() != net.input_len() {
        return Err(Error::ShapeMismatch {
            expected: net.input_len(),
            actual: input.len(),
        });
    }
    Ok(forward_unchecked(net, input))
}

pub(crate) fn forward_unchecked(net: &NetworkSpec, input: &[f64]) -> Vec<Vec<f64>> {
    let last = net.layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let x = if l == 0 { input } else { &acts[l - 1] };
        let mut z = vec![0.0; layer.out_len()];
        layer.affine(x, &mut z);
        if l != last {
            relu_in_place(&mut z);
        }
        acts.push(z);
    }
    acts
}

#[inline]
pub(crate) fn relu_in_place(z: &mut [f64]) {
    for v in z {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn predict(net: &NetworkSpec, input: &[f64]) -> Result<usize> {
    let acts = forward(net, input)?;
    Ok(argmax(acts.last().expect("network has layers")))
}

/// Fraction of samples classified correctly.
pub fn accuracy(net: &NetworkSpec, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != net.input_len() {
        return Err(Error::ShapeMismatch {
            expected: net.input_len(),
            actual: data.dim(),
        });
    }
    let correct = (0..data.len())
        .into_par_iter()
        .filter(|&i| {
            let acts = forward_unchecked(net, data.sample(i));
            argmax(acts.last().unwrap()) == data.labels[i] as usize
        })
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Dense ReLU network with He-normal weights and zero biases.
pub fn init_mlp(sizes: &[usize], seed: u64, time_window: u32) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernel = KernelParams::initial(time_window);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).unwrap();
            let weights = (0..w[0] * w[1]).map(|_| normal.sample(&mut rng)).collect();
            LayerSpec::dense(w[0], w[1], weights, vec![0.0; w[1]], kernel)
        })
        .collect();
    NetworkSpec::new(layers, time_window)
}

/// Two stride-2 3x3 convolutions followed by a dense classifier.
pub fn init_toy_cnn(
    in_shape: [usize; 3],
    channels: [usize; 2],
    classes: usize,
    seed: u64,
    time_window: u32,
) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernel = KernelParams::initial(time_window);
    let mut layers = Vec::new();
    let mut shape = in_shape;
    for &out_c in &channels {
        let g = ConvGeometry {
            in_channels: shape[0],
            out_channels: out_c,
            kernel_size: 3,
            stride: 2,
            padding: 1,
        };
        let fan_in = (shape[0] * 9) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
        let weights = (0..g.weight_len()).map(|_| normal.sample(&mut rng)).collect();
        let layer = LayerSpec::conv2d(shape, g, weights, vec![0.0; out_c], kernel);
        let out = &layer.out_shape;
        shape = [out[0], out[1], out[2]];
        layers.push(layer);
    }
    let flat: usize = shape.iter().product();
    let normal = Normal::new(0.0, (2.0 / flat as f64).sqrt()).unwrap();
    let weights = (0..flat * classes).map(|_| normal.sample(&mut rng)).collect();
    layers.push(LayerSpec::dense(flat, classes, weights, vec![0.0; classes], kernel));
    NetworkSpec::new(layers, time_window)
}
