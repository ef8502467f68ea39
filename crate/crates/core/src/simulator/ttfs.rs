use std::iter;

use super::{check_input, Engine, RunOptions, SpikeEvent};
use crate::codec::kernel_table;
use crate::dnn::argmax;
use crate::error::{Error, Result};
use crate::metrics::RunStats;
use crate::network::NetworkSpec;
use crate::schedule::PhaseSchedule;
use crate::state::LayerState;

#[derive(Debug, Clone, PartialEq)]
pub struct TtfsOutput {
    pub prediction: usize,
    /// Output-layer membrane potentials at the decision time.
    pub output_potentials: Vec<f64>,
    pub stats: RunStats,
    /// Absolute spike times per firing layer: entry 0 is the input encoder,
    /// entry `l` the neurons driven by weight layer `l`. The output layer
    /// never fires and has no entry.
    pub spike_times: Vec<Vec<Option<u32>>>,
    pub checkpoint_predictions: Vec<(u32, usize)>,
    /// Every spike ordered by time, then layer, then neuron. Empty unless
    /// requested.
    pub trace: Vec<SpikeEvent>,
}

impl TtfsOutput {
    pub fn hidden_spikes(&self) -> u64 {
        self.spike_times[1..].iter().flatten().filter(|t| t.is_some()).count() as u64
    }
}

pub fn run_ttfs(net: &NetworkSpec, input: &[f64], schedule: &PhaseSchedule) -> Result<TtfsOutput> {
    run_ttfs_with(net, input, schedule, &RunOptions::default())
}

pub fn run_ttfs_with(
    net: &NetworkSpec,
    input: &[f64],
    schedule: &PhaseSchedule,
    opts: &RunOptions,
) -> Result<TtfsOutput> {
    net.validate()?;
    check_input(net, input)?;
    if schedule.num_layers() != net.num_layers() {
        return Err(Error::ScheduleMismatch {
            schedule: schedule.num_layers(),
            network: net.num_layers(),
        });
    }
    if schedule.time_window != net.time_window {
        return Err(Error::Config(format!(
            "schedule time window {} differs from the network's {}",
            schedule.time_window, net.time_window
        )));
    }

    let depth = net.num_layers();
    let window = net.time_window;
    let latency = schedule.latency();
    // kernel of the spikes sent by layer s = kernel of weight layer s
    let tables: Vec<Vec<f64>> = net.layers.iter().map(|l| kernel_table(l.kernel, window)).collect();
    let fire_start: Vec<u32> = iter::once(0)
        .chain(schedule.layers[..depth - 1].iter().map(|w| w.fire_start))
        .collect();

    let mut states: Vec<LayerState> = iter::once(LayerState::with_potentials(input.to_vec()))
        .chain(net.layers.iter().map(|l| LayerState::new(l.out_len())))
        .collect();
    let mut pending: Vec<Vec<usize>> = states[..depth].iter().map(|s| (0..s.len()).collect()).collect();
    // pixels are the only drive of the encoder, so non-positive ones never fire
    pending[0].retain(|&i| input[i] > 0.0);

    let mut trace = Vec::new();
    let mut checkpoints: Vec<(u32, Option<usize>)> = opts.checkpoints.iter().map(|&c| (c, None)).collect();
    let mut spikes = Vec::new();

    for t in 0..latency {
        for cp in checkpoints.iter_mut().filter(|c| c.0 == t) {
            cp.1 = Some(argmax(&states[depth].u));
        }
        for (l, w) in schedule.layers.iter().enumerate() {
            if w.integration_start == t {
                let layer = &net.layers[l];
                for (j, u) in states[l + 1].u.iter_mut().enumerate() {
                    *u += layer.bias_of(j);
                }
            }
        }
        for s in 0..depth {
            let start = fire_start[s];
            if t < start || t >= start + window {
                continue;
            }
            let eps = tables[s][(t - start) as usize];
            let threshold = net.theta0 * eps;
            let (lower, upper) = states.split_at_mut(s + 1);
            let (src, dst) = (&mut lower[s], &mut upper[0]);
            let layer = &net.layers[s];
            match opts.engine {
                Engine::EventDriven => {
                    spikes.clear();
                    pending[s].retain(|&i| {
                        if src.u[i] >= threshold {
                            src.fire(i, t);
                            spikes.push(i);
                            false
                        } else {
                            true
                        }
                    });
                    for &i in &spikes {
                        layer.scatter(i, eps, &mut dst.u);
                    }
                    if opts.record_trace {
                        trace.extend(spikes.iter().map(|&neuron| SpikeEvent {
                            time: t,
                            layer: s,
                            neuron,
                        }));
                    }
                }
                Engine::Dense => {
                    let mut x = vec![0.0; src.len()];
                    for i in 0..src.len() {
                        if !src.fired(i) && src.u[i] >= threshold {
                            src.fire(i, t);
                            x[i] = eps;
                            if opts.record_trace {
                                trace.push(SpikeEvent {
                                    time: t,
                                    layer: s,
                                    neuron: i,
                                });
                            }
                        }
                    }
                    layer.gather(&x, &mut dst.u);
                }
            }
        }
    }

    let output_potentials = states.pop().expect("output layer").u;
    let prediction = argmax(&output_potentials);
    let checkpoint_predictions = checkpoints
        .into_iter()
        .map(|(c, p)| (c, p.unwrap_or(prediction)))
        .collect();
    let input_spikes = states[0].spike_count() as u64;
    let total_spikes: u64 = states.iter().map(|s| s.spike_count() as u64).sum();
    Ok(TtfsOutput {
        prediction,
        output_potentials,
        stats: RunStats::new(prediction, None, total_spikes, input_spikes, latency),
        spike_times: states.into_iter().map(LayerState::into_spike_times).collect(),
        checkpoint_predictions,
        trace,
    })
}
