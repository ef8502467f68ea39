//! Layer-wise fitting of kernel parameters `(tau, t_d)` to recorded activations.
//!
//! Three losses pull on each kernel. The precision loss is the squared gap
//! between a value and its decoded reconstruction and favours a large `tau`
//! (a finer grid). The minimum-representation loss matches the smallest
//! value the window can still encode, `exp(-(T - t_d)/tau)`, to the smallest
//! recorded activation and favours a small `tau`. The maximum-representation
//! loss matches `exp(t_d/tau)` to the largest activation and is the only one
//! that moves `t_d`.
//!
//! Spike times come from a ceiling and have no useful derivative, so every
//! gradient holds them fixed at the current iterate.

use std::path::Path;

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{encode_spike_time, kernel_value};
use crate::dnn::{ActivationStats, ValueHistogram};
use crate::error::{Error, Result};
use crate::network::{KernelParams, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelLossReport {
    pub l_prec: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl KernelLossReport {
    pub fn total(&self) -> f64 {
        self.l_prec + self.l_min + self.l_max
    }
}

/// State of one layer's kernel after `iteration` updates (0 = initial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub layer: usize,
    pub loss: KernelLossReport,
    pub kernel: KernelParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoptConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub tau_floor: f64,
    pub seed: u64,
    /// Total loss above which a layer's optimization is abandoned.
    pub divergence_limit: f64,
}

impl Default for KoptConfig {
    fn default() -> Self {
        KoptConfig {
            learning_rate: 0.1,
            iterations: 200,
            batch_size: 64,
            tau_floor: 0.1,
            seed: 0,
            divergence_limit: 1e6,
        }
    }
}

/// `(value, weight, spike offset)` for every value that produces a spike.
fn encodable<'a>(
    values: impl IntoIterator<Item = (f64, f64)> + 'a,
    k: KernelParams,
    time_window: u32,
) -> impl Iterator<Item = (f64, f64, u32)> + 'a {
    values
        .into_iter()
        .filter_map(move |(z, w)| encode_spike_time(z, k, time_window).map(|t| (z, w, t)))
}

fn weighted_precision(values: impl IntoIterator<Item = (f64, f64)>, k: KernelParams, time_window: u32) -> Option<f64> {
    let (mut sum, mut weight) = (0.0, 0.0);
    for (z, w, t) in encodable(values, k, time_window) {
        let r = z - kernel_value(k, t);
        sum += w * 0.5 * r * r;
        weight += w;
    }
    (weight > 0.0).then(|| sum / weight)
}

fn weighted_grad_precision(values: impl IntoIterator<Item = (f64, f64)>, k: KernelParams, time_window: u32) -> f64 {
    let (mut sum, mut weight) = (0.0, 0.0);
    for (z, w, t) in encodable(values, k, time_window) {
        let zh = kernel_value(k, t);
        sum += w * (f64::from(t) - k.t_d) / (k.tau * k.tau) * (z - zh) * zh;
        weight += w;
    }
    if weight > 0.0 {
        -sum / weight
    } else {
        0.0
    }
}

/// Mean of `0.5 * (z - eps(t(z)))^2` over the values of `zbar` that spike.
pub fn loss_precision(zbar: &[f64], k: KernelParams, time_window: u32) -> Result<f64> {
    weighted_precision(zbar.iter().map(|&z| (z, 1.0)), k, time_window).ok_or(Error::EmptyEncodableSet)
}

pub fn loss_min(zbar_min: f64, k: KernelParams, time_window: u32) -> f64 {
    let r = zbar_min - min_representable(k, time_window);
    0.5 * r * r
}

pub fn loss_max(zbar_max: f64, k: KernelParams) -> f64 {
    let r = zbar_max - max_representable(k);
    0.5 * r * r
}

fn min_representable(k: KernelParams, time_window: u32) -> f64 {
    (-(f64::from(time_window) - k.t_d) / k.tau).exp()
}

fn max_representable(k: KernelParams) -> f64 {
    (k.t_d / k.tau).exp()
}

/// d(loss_precision)/d(tau) with spike times frozen; 0 when nothing spikes.
pub fn grad_tau_precision(zbar: &[f64], k: KernelParams, time_window: u32) -> f64 {
    weighted_grad_precision(zbar.iter().map(|&z| (z, 1.0)), k, time_window)
}

/// d(loss_min)/d(tau).
pub fn grad_tau_min(zbar_min: f64, k: KernelParams, time_window: u32) -> f64 {
    let span = f64::from(time_window) - k.t_d;
    let zh = min_representable(k, time_window);
    -span / (k.tau * k.tau) * (zbar_min - zh) * zh
}

/// Combined `tau` gradient of the precision and minimum-representation
/// losses, with `zbar_min` the smallest positive entry of `zbar`.
pub fn grad_tau(zbar: &[f64], k: KernelParams, time_window: u32) -> f64 {
    let zbar_min = zbar.iter().copied().filter(|&z| z > 0.0).fold(f64::INFINITY, f64::min);
    let g_min = if zbar_min.is_finite() {
        grad_tau_min(zbar_min, k, time_window)
    } else {
        0.0
    };
    grad_tau_precision(zbar, k, time_window) + g_min
}

/// d(loss_max)/d(t_d).
pub fn grad_td(zbar_max: f64, k: KernelParams) -> f64 {
    let zh = max_representable(k);
    -(zbar_max - zh) * zh / k.tau
}

/// Losses over a whole recorded distribution. The precision term is 0 when
/// no value spikes.
pub fn evaluate(hist: &ValueHistogram, k: KernelParams, time_window: u32) -> KernelLossReport {
    let points = hist.weighted_midpoints();
    KernelLossReport {
        l_prec: weighted_precision(points.iter().map(|&(z, c)| (z, c as f64)), k, time_window).unwrap_or(0.0),
        l_min: loss_min(hist.min_positive, k, time_window),
        l_max: loss_max(hist.max, k),
    }
}

/// Mini-batch gradient descent on one kernel. A step is kept only if it does
/// not raise the total loss over the whole distribution (the spike-time
/// ceiling makes the precision loss a sawtooth that a frozen-time gradient
/// cannot see), so the loss never increases along the history. Returns the
/// final kernel and `iterations + 1` records, the first one for the starting
/// point.
pub fn optimize_kernel(
    hist: &ValueHistogram,
    init: KernelParams,
    time_window: u32,
    cfg: &KoptConfig,
    layer: usize,
) -> Result<(KernelParams, Vec<IterationRecord>)> {
    let points = hist.weighted_midpoints();
    if points.is_empty() || !hist.min_positive.is_finite() {
        return Err(Error::DegenerateStats { layer });
    }
    if !(cfg.learning_rate >= 0.0) || !(cfg.tau_floor > 0.0) || cfg.batch_size == 0 {
        return Err(Error::Config(format!(
            "kernel optimizer needs lr >= 0, tau_floor > 0 and batch_size > 0, got {cfg:?}"
        )));
    }
    let sampler = WeightedIndex::new(points.iter().map(|p| p.1)).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(layer as u64);

    let mut k = init.clamped(cfg.tau_floor, time_window);
    let mut records = Vec::with_capacity(cfg.iterations + 1);
    let check = |iteration: usize, loss: KernelLossReport| -> Result<()> {
        let total = loss.total();
        if !total.is_finite() || total > cfg.divergence_limit {
            return Err(Error::Divergence {
                layer,
                iteration,
                loss: total,
            });
        }
        Ok(())
    };
    let mut loss = evaluate(hist, k, time_window);
    check(0, loss)?;
    records.push(IterationRecord {
        iteration: 0,
        layer,
        loss,
        kernel: k,
    });

    let mut batch = Vec::with_capacity(cfg.batch_size);
    for iteration in 1..=cfg.iterations {
        batch.clear();
        batch.extend((0..cfg.batch_size).map(|_| points[sampler.sample(&mut rng)].0));
        let g_tau = grad_tau_precision(&batch, k, time_window) + grad_tau_min(hist.min_positive, k, time_window);
        let g_td = grad_td(hist.max, k);
        let next = KernelParams::new(k.tau - cfg.learning_rate * g_tau, k.t_d - cfg.learning_rate * g_td);
        if !next.tau.is_finite() || !next.t_d.is_finite() {
            return Err(Error::Divergence {
                layer,
                iteration,
                loss: f64::NAN,
            });
        }
        let candidate = next.clamped(cfg.tau_floor, time_window);
        let candidate_loss = evaluate(hist, candidate, time_window);
        check(iteration, candidate_loss)?;
        if candidate_loss.total() <= loss.total() {
            k = candidate;
            loss = candidate_loss;
        }
        records.push(IterationRecord {
            iteration,
            layer,
            loss,
            kernel: k,
        });
    }
    Ok((k, records))
}

/// Optimizes every layer's kernel against `stats`, which must describe the
/// network as given (for a normalized network, the rescaled statistics).
/// Layers are independent and run in parallel; the history is ordered by
/// layer, then iteration.
pub fn optimize(
    net: &NetworkSpec,
    stats: &ActivationStats,
    cfg: &KoptConfig,
) -> Result<(NetworkSpec, Vec<IterationRecord>)> {
    if stats.layers.len() != net.layers.len() {
        return Err(Error::Config(format!(
            "stats cover {} layers, network has {}",
            stats.layers.len(),
            net.layers.len()
        )));
    }
    let results: Vec<(KernelParams, Vec<IterationRecord>)> = (0..net.layers.len())
        .into_par_iter()
        .map(|l| optimize_kernel(stats.encoded_values(l), net.layers[l].kernel, net.time_window, cfg, l))
        .collect::<Result<_>>()?;
    let mut out = net.clone();
    let mut history = Vec::new();
    for (layer, (k, records)) in out.layers.iter_mut().zip(results) {
        layer.kernel = k;
        history.extend(records);
    }
    Ok((out, history))
}

pub fn loss_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,layer,l_prec,l_min,l_max,tau,t_d\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{:e},{:e},{:e},{},{}\n",
            r.iteration, r.layer, r.loss.l_prec, r.loss.l_min, r.loss.l_max, r.kernel.tau, r.kernel.t_d
        ));
    }
    s
}

pub fn write_loss_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    std::fs::write(path, loss_csv(records)).map_err(|e| Error::io(path, e))
}
