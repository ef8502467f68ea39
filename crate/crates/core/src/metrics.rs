//! Spike, latency and energy accounting.
//!
//! Energy follows the usual neuromorphic cost model
//! `spikes * e_dyn + latency * e_sta`, with normalized coefficient presets for
//! TrueNorth and SpiNNaker.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub e_dyn: f64,
    pub e_sta: f64,
}

pub const TRUENORTH: EnergyParams = EnergyParams { e_dyn: 0.4, e_sta: 0.6 };
pub const SPINNAKER: EnergyParams = EnergyParams {
    e_dyn: 0.64,
    e_sta: 0.36,
};

impl EnergyParams {
    #[inline]
    pub fn energy(&self, spikes: f64, latency: f64) -> f64 {
        spikes * self.e_dyn + latency * self.e_sta
    }
}

pub fn estimate_energy(spikes: u64, latency: u64, p: EnergyParams) -> f64 {
    p.energy(spikes as f64, latency as f64)
}

/// Outcome of one inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub predicted_label: usize,
    pub label: Option<usize>,
    /// Every emitted spike, input encoders included.
    pub total_spikes: u64,
    pub input_spikes: u64,
    /// Time steps until the output decision.
    pub latency: u32,
    pub energy_tn: f64,
    pub energy_sn: f64,
}

impl RunStats {
    pub fn new(
        predicted_label: usize,
        label: Option<usize>,
        total_spikes: u64,
        input_spikes: u64,
        latency: u32,
    ) -> Self {
        RunStats {
            predicted_label,
            label,
            total_spikes,
            input_spikes,
            latency,
            energy_tn: estimate_energy(total_spikes, u64::from(latency), TRUENORTH),
            energy_sn: estimate_energy(total_spikes, u64::from(latency), SPINNAKER),
        }
    }

    pub fn correct(&self) -> Option<bool> {
        self.label.map(|l| l == self.predicted_label)
    }

    fn counted_spikes(&self, include_input: bool) -> u64 {
        if include_input {
            self.total_spikes
        } else {
            self.total_spikes - self.input_spikes
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryOptions {
    pub count_input_spikes: bool,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            count_input_spikes: true,
        }
    }
}

/// Aggregate over a set of inferences. Spike and energy figures are per inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: String,
    pub runs: usize,
    /// Fraction correct among labelled runs; `None` when no run had a label.
    pub accuracy: Option<f64>,
    pub total_spikes: u64,
    pub mean_spikes: f64,
    pub mean_latency: f64,
    pub energy_tn: f64,
    pub energy_sn: f64,
    pub normalized_energy_tn: Option<f64>,
    pub normalized_energy_sn: Option<f64>,
}

pub fn summarize(method: &str, runs: &[RunStats], baseline: Option<&Report>, opts: SummaryOptions) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = runs.len() as f64;
    let total_spikes: u64 = runs.iter().map(|r| r.counted_spikes(opts.count_input_spikes)).sum();
    let total_latency: u64 = runs.iter().map(|r| u64::from(r.latency)).sum();
    let labelled: Vec<bool> = runs.iter().filter_map(RunStats::correct).collect();
    let accuracy =
        (!labelled.is_empty()).then(|| labelled.iter().filter(|&&c| c).count() as f64 / labelled.len() as f64);
    let mean_spikes = total_spikes as f64 / n;
    let mean_latency = total_latency as f64 / n;
    let energy_tn = TRUENORTH.energy(mean_spikes, mean_latency);
    let energy_sn = SPINNAKER.energy(mean_spikes, mean_latency);
    Ok(Report {
        method: method.to_string(),
        runs: runs.len(),
        accuracy,
        total_spikes,
        mean_spikes,
        mean_latency,
        energy_tn,
        energy_sn,
        normalized_energy_tn: baseline.map(|b| energy_tn / b.energy_tn),
        normalized_energy_sn: baseline.map(|b| energy_sn / b.energy_sn),
    })
}

impl Report {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

/// Fixed-width text table, one row per report.
pub fn format_table(reports: &[Report]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>7} {:>9} {:>12} {:>10} {:>12} {:>12} {:>8} {:>8}",
        "method", "runs", "acc(%)", "spikes/inf", "latency", "E_TN", "E_SN", "nE_TN", "nE_SN"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<24} {:>7} {:>9} {:>12.1} {:>10.1} {:>12.2} {:>12.2} {:>8} {:>8}",
            r.method,
            r.runs,
            opt(r.accuracy.map(|a| a * 100.0), 2),
            r.mean_spikes,
            r.mean_latency,
            r.energy_tn,
            r.energy_sn,
            opt(r.normalized_energy_tn, 3),
            opt(r.normalized_energy_sn, 3),
        );
    }
    s
}
