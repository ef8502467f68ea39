//! Small random networks and inputs for simulator tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfs_core::data::Dataset;
use ttfs_core::{KernelParams, LayerSpec, NetworkSpec};

/// Dense net with weights uniform in `[-s, s]` (or `[0, s]` when `nonneg`),
/// `s = gain / sqrt(fan_in)`, and biases uniform in `[-0.1, 0.1]`.
pub fn random_mlp(
    sizes: &[usize],
    seed: u64,
    nonneg: bool,
    gain: f64,
    kernel: KernelParams,
    window: u32,
) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let s = gain / (w[0] as f64).sqrt();
            let lo = if nonneg { 0.0 } else { -s };
            let weights = (0..w[0] * w[1]).map(|_| rng.random_range(lo..=s)).collect();
            let bias = (0..w[1]).map(|_| rng.random_range(-0.1..=0.1)).collect();
            LayerSpec::dense(w[0], w[1], weights, bias, kernel)
        })
        .collect();
    NetworkSpec::new(layers, window)
}

pub fn random_input(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..=1.0)
            }
        })
        .collect()
}

pub fn random_dataset(dim: usize, n: usize, classes: u8, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(dim * n);
    for i in 0..n {
        features.extend(random_input(dim, seed.wrapping_mul(1000) + i as u64));
    }
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Dataset::new(vec![dim], features, labels).unwrap()
}
