//! Discrete-time execution of converted networks.
//!
//! [`run_ttfs`] runs the single-spike temporal code under a [`PhaseSchedule`];
//! [`run_rate_baseline`] runs the same weights as a rate-coded IF network for
//! comparison. [`classify_batch`] fans inputs out over a thread pool.

mod rate;
mod ttfs;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::RunStats;
use crate::network::NetworkSpec;
use crate::schedule::PhaseSchedule;

pub use rate::{run_rate_baseline, run_rate_with, RateOutput};
pub use ttfs::{run_ttfs, run_ttfs_with, TtfsOutput};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Touch only neurons that receive spikes or have not fired yet.
    #[default]
    EventDriven,
    /// Sweep every neuron and every synapse at every step.
    Dense,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub engine: Engine,
    pub record_trace: bool,
    /// Absolute time steps at which the decision is also read out, using
    /// only what arrived strictly before that step.
    pub checkpoints: Vec<u32>,
}

/// One spike. Layer 0 is the input encoder, layer `l` the output of weight layer `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub time: u32,
    pub layer: usize,
    pub neuron: usize,
}

pub fn write_trace_csv(path: &Path, events: &[SpikeEvent]) -> Result<()> {
    let mut s = String::from("layer,neuron,time\n");
    for e in events {
        s.push_str(&format!("{},{},{}\n", e.layer, e.neuron, e.time));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Multiples of `step` up to and including `end`.
pub fn checkpoint_grid(step: u32, end: u32) -> Vec<u32> {
    if step == 0 {
        return Vec::new();
    }
    (1..=end / step).map(|i| i * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub runs: Vec<RunStats>,
    pub accuracy: f64,
    pub mean_spikes: f64,
    pub mean_latency: f64,
    /// Largest per-input count of spikes emitted by hidden neurons.
    pub max_hidden_spikes: u64,
    /// `(checkpoint, accuracy)` for every requested checkpoint.
    pub curve: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coding {
    Ttfs,
    /// Rate-coded IF run of the given number of steps.
    Rate(u32),
}

struct Single {
    stats: RunStats,
    hidden_spikes: u64,
    checkpoints: Vec<usize>,
}

/// Runs every sample of `data` and aggregates. Results are independent of
/// the thread count: runs share nothing and are collected in input order.
pub fn classify_batch(
    net: &NetworkSpec,
    data: &Dataset,
    schedule: &PhaseSchedule,
    coding: Coding,
    opts: &RunOptions,
) -> Result<BatchOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let opts = RunOptions {
        record_trace: false,
        ..opts.clone()
    };
    let singles: Vec<Single> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let label = Some(usize::from(data.labels[i]));
            match coding {
                Coding::Ttfs => run_ttfs_with(net, data.sample(i), schedule, &opts).map(|o| {
                    let hidden = o.hidden_spikes();
                    let mut stats = o.stats;
                    stats.label = label;
                    Single {
                        stats,
                        hidden_spikes: hidden,
                        checkpoints: o.checkpoint_predictions.iter().map(|c| c.1).collect(),
                    }
                }),
                Coding::Rate(steps) => run_rate_with(net, data.sample(i), steps, &opts.checkpoints).map(|o| {
                    let hidden = o.hidden_spikes();
                    let mut stats = o.stats;
                    stats.label = label;
                    Single {
                        stats,
                        hidden_spikes: hidden,
                        checkpoints: o.checkpoint_predictions.iter().map(|c| c.1).collect(),
                    }
                }),
            }
        })
        .collect::<Result<_>>()?;

    let n = singles.len() as f64;
    let correct = singles.iter().filter(|s| s.stats.correct() == Some(true)).count();
    let curve = opts
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let hits = singles
                .iter()
                .filter(|s| s.stats.label == Some(s.checkpoints[k]))
                .count();
            (t, hits as f64 / n)
        })
        .collect();
    Ok(BatchOutcome {
        accuracy: correct as f64 / n,
        mean_spikes: singles.iter().map(|s| s.stats.total_spikes as f64).sum::<f64>() / n,
        mean_latency: singles.iter().map(|s| f64::from(s.stats.latency)).sum::<f64>() / n,
        max_hidden_spikes: singles.iter().map(|s| s.hidden_spikes).max().unwrap_or(0),
        curve,
        runs: singles.into_iter().map(|s| s.stats).collect(),
    })
}

fn check_input(net: &NetworkSpec, input: &[f64]) -> Result<()> {
    if input.len() != net.input_len() {
        return Err(Error::ShapeMismatch {
            expected: net.input_len(),
            actual: input.len(),
        });
    }
    Ok(())
}
