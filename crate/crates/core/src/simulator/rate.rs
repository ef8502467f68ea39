use std::iter;

use super::check_input;
use crate::error::Result;
use crate::metrics::RunStats;
use crate::network::NetworkSpec;

/// Rate-coded IF run: unit thresholds, reset by subtraction, bias injected
/// every step, zero synaptic delay between layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RateOutput {
    pub prediction: usize,
    /// Spike counts per layer: entry 0 is the input, the last entry the output.
    pub spike_counts: Vec<Vec<u32>>,
    pub output_potentials: Vec<f64>,
    pub stats: RunStats,
    pub checkpoint_predictions: Vec<(u32, usize)>,
}

impl RateOutput {
    /// Spikes of hidden layers only (input and output excluded).
    pub fn hidden_spikes(&self) -> u64 {
        let last = self.spike_counts.len() - 1;
        self.spike_counts[1..last].iter().flatten().map(|&c| u64::from(c)).sum()
    }
}

pub fn run_rate_baseline(net: &NetworkSpec, input: &[f64], steps: u32) -> Result<RateOutput> {
    run_rate_with(net, input, steps, &[])
}

/// Most spikes wins; ties go to the higher membrane potential, then the lower index.
fn decide(counts: &[u32], u: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..counts.len() {
        if counts[j] > counts[best] || (counts[j] == counts[best] && u[j] > u[best]) {
            best = j;
        }
    }
    best
}

pub fn run_rate_with(net: &NetworkSpec, input: &[f64], steps: u32, checkpoints: &[u32]) -> Result<RateOutput> {
    check_input(net, input)?;
    let depth = net.num_layers();
    let mut u: Vec<Vec<f64>> = iter::once(input.len())
        .chain(net.layers.iter().map(|l| l.out_len()))
        .map(|n| vec![0.0; n])
        .collect();
    let mut counts: Vec<Vec<u32>> = u.iter().map(|v| vec![0; v.len()]).collect();
    let mut cps: Vec<(u32, Option<usize>)> = checkpoints.iter().map(|&c| (c, None)).collect();
    let mut fired: Vec<usize> = Vec::new();
    let mut next: Vec<usize> = Vec::new();

    for t in 0..steps {
        for cp in cps.iter_mut().filter(|c| c.0 == t) {
            cp.1 = Some(decide(&counts[depth], &u[depth]));
        }
        fired.clear();
        for (i, (ui, &x)) in u[0].iter_mut().zip(input).enumerate() {
            *ui += x;
            if *ui >= 1.0 {
                *ui -= 1.0;
                counts[0][i] += 1;
                fired.push(i);
            }
        }
        for (l, layer) in net.layers.iter().enumerate() {
            let dst = &mut u[l + 1];
            for (j, v) in dst.iter_mut().enumerate() {
                *v += layer.bias_of(j);
            }
            for &i in &fired {
                layer.scatter(i, 1.0, dst);
            }
            next.clear();
            for (j, v) in dst.iter_mut().enumerate() {
                if *v >= 1.0 {
                    *v -= 1.0;
                    counts[l + 1][j] += 1;
                    next.push(j);
                }
            }
            std::mem::swap(&mut fired, &mut next);
        }
    }

    let prediction = decide(&counts[depth], &u[depth]);
    let total: u64 = counts.iter().flatten().map(|&c| u64::from(c)).sum();
    let input_spikes: u64 = counts[0].iter().map(|&c| u64::from(c)).sum();
    Ok(RateOutput {
        prediction,
        output_potentials: u.pop().expect("output layer"),
        stats: RunStats::new(prediction, None, total, input_spikes, steps),
        spike_counts: counts,
        checkpoint_predictions: cps.into_iter().map(|(c, p)| (c, p.unwrap_or(prediction))).collect(),
    })
}
