//! Data-based weight normalization: rescale every layer so its recorded
//! activations fall into `[0, 1]`, the range a unit threshold can encode.

use crate::dnn::ActivationStats;
use crate::error::{Error, Result};
use crate::network::{KernelParams, NetworkSpec};

/// `w' = w * lambda_prev / lambda`, `b' = b / lambda`, with `lambda_prev = 1`
/// for the first layer (pixels are already in `[0, 1]`).
pub fn normalize(net: &NetworkSpec, stats: &ActivationStats) -> Result<NetworkSpec> {
    let lambdas = stats.lambdas();
    if lambdas.len() != net.layers.len() {
        return Err(Error::Config(format!(
            "stats cover {} layers, network has {}",
            lambdas.len(),
            net.layers.len()
        )));
    }
    if let Some((layer, &value)) = lambdas.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidScale { layer, value });
    }
    let mut out = net.clone();
    let mut prev = 1.0;
    for (layer, &lambda) in out.layers.iter_mut().zip(&lambdas) {
        let w_scale = prev / lambda;
        layer.weights.iter_mut().for_each(|w| *w *= w_scale);
        layer.bias.iter_mut().for_each(|b| *b /= lambda);
        prev = lambda;
    }
    Ok(out)
}

/// Normalize and attach the same starting kernel to every layer.
pub fn convert(net: &NetworkSpec, stats: &ActivationStats, kernel: KernelParams) -> Result<NetworkSpec> {
    let mut out = normalize(net, stats)?;
    out.set_kernels(kernel);
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, BlobConfig};
    use crate::dnn::{argmax, forward, init_mlp, record_stats, Normalization};
    use crate::layer::LayerSpec;

    fn stats_with(lambdas: &[f64], net: &NetworkSpec) -> ActivationStats {
        let data = make_blobs(BlobConfig {
            classes: 2,
            per_class: 10,
            dim: net.input_len(),
            spread: 0.2,
            seed: 1,
        });
        let mut s = record_stats(net, &data, Normalization::Max).unwrap();
        for (l, &v) in s.layers.iter_mut().zip(lambdas) {
            l.lambda = v;
        }
        s
    }

    #[test]
    fn unit_lambdas_leave_net_unchanged() {
        let net = init_mlp(&[3, 4, 2], 1, 20);
        let s = stats_with(&[1.0, 1.0], &net);
        assert_eq!(normalize(&net, &s).unwrap(), net);
    }

    #[test]
    fn single_layer_formula() {
        let k = KernelParams::initial(20);
        let net = NetworkSpec::new(vec![LayerSpec::dense(1, 1, vec![1.0], vec![0.5], k)], 20);
        let s = stats_with(&[2.0], &net);
        let n = normalize(&net, &s).unwrap();
        assert_eq!(n.layers[0].weights, vec![0.5]);
        assert_eq!(n.layers[0].bias, vec![0.25]);
    }

    #[test]
    fn non_positive_lambda_is_rejected() {
        let net = init_mlp(&[3, 4, 2], 1, 20);
        let s = stats_with(&[1.0, 0.0], &net);
        assert!(matches!(normalize(&net, &s), Err(Error::InvalidScale { layer: 1, .. })));
    }

    #[test]
    fn activations_are_divided_by_lambda_and_argmax_kept() {
        let data = make_blobs(BlobConfig {
            classes: 3,
            per_class: 40,
            dim: 5,
            spread: 0.2,
            seed: 12,
        });
        let mut net = init_mlp(&[5, 9, 7, 3], 6, 20);
        net.layers[1]
            .bias
            .iter_mut()
            .enumerate()
            .for_each(|(i, b)| *b = 0.03 * i as f64);
        let stats = record_stats(&net, &data, Normalization::Max).unwrap();
        let norm = normalize(&net, &stats).unwrap();
        let lambdas = stats.lambdas();
        for i in 0..data.len() {
            let a = forward(&net, data.sample(i)).unwrap();
            let b = forward(&norm, data.sample(i)).unwrap();
            for l in 0..3 {
                for (x, y) in a[l].iter().zip(&b[l]) {
                    assert!((x / lambdas[l] - y).abs() < 1e-12);
                }
            }
            assert_eq!(argmax(&a[2]), argmax(&b[2]));
        }
        let again = record_stats(&norm, &data, Normalization::Max).unwrap();
        assert!(again.lambdas().iter().all(|&l| l <= 1.0 + 1e-9));
    }
}
