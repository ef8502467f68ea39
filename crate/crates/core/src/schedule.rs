//! Integration/fire phase timing for each layer.
//!
//! The input encoder fires during `[0, T)`. Weight layer `l` (1-based)
//! integrates during the fire phase of the layer before it and fires during
//! `[fire_start(l), fire_start(l) + T)`. The output layer never fires: its
//! decision is read at `fire_start(L)`, which is the reported latency.
//!
//! * baseline: `fire_start(l) = l * T`, so each layer sees the complete
//!   previous fire phase before encoding.
//! * early firing: layer 1 still integrates the full input window
//!   (`fire_start(1) = T`); every later layer starts firing `T/2` steps after
//!   its integration began, `fire_start(l) = fire_start(l-1) + T/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    Baseline,
    EarlyFiring,
}

impl std::str::FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ScheduleMode::Baseline),
            "early-firing" | "early_firing" | "ef" => Ok(ScheduleMode::EarlyFiring),
            other => Err(Error::Config(format!("unknown schedule {other:?}"))),
        }
    }
}

/// Absolute time steps of one layer's phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerWindow {
    pub integration_start: u32,
    pub fire_start: u32,
    pub fire_end: u32,
}

impl LayerWindow {
    /// Integration lasts one full window: the presynaptic fire phase.
    pub fn integration_end(&self, time_window: u32) -> u32 {
        self.integration_start + time_window
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub mode: ScheduleMode,
    pub time_window: u32,
    /// One entry per weight layer; entry 0 integrates the input spikes.
    pub layers: Vec<LayerWindow>,
}

impl PhaseSchedule {
    /// Fire window of the input encoder.
    pub fn input_window(&self) -> LayerWindow {
        LayerWindow {
            integration_start: 0,
            fire_start: 0,
            fire_end: self.time_window,
        }
    }

    /// Time step at which the output layer's decision is read.
    pub fn latency(&self) -> u32 {
        self.layers.last().map_or(0, |w| w.fire_start)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

pub fn build_schedule(num_layers: usize, time_window: u32, mode: ScheduleMode) -> Result<PhaseSchedule> {
    if num_layers == 0 {
        return Err(Error::Config("schedule needs at least one layer".into()));
    }
    if time_window == 0 {
        return Err(Error::Config("time window must be positive".into()));
    }
    if mode == ScheduleMode::EarlyFiring && !time_window.is_multiple_of(2) {
        return Err(Error::OddTimeWindow(time_window));
    }
    let t = time_window;
    let mut layers = Vec::with_capacity(num_layers);
    let mut prev_fire = 0u32;
    for l in 0..num_layers {
        let integration_start = prev_fire;
        let fire_start = match (mode, l) {
            (ScheduleMode::Baseline, _) | (ScheduleMode::EarlyFiring, 0) => integration_start + t,
            (ScheduleMode::EarlyFiring, _) => integration_start + t / 2,
        };
        layers.push(LayerWindow {
            integration_start,
            fire_start,
            fire_end: fire_start + t,
        });
        prev_fire = fire_start;
    }
    Ok(PhaseSchedule {
        mode,
        time_window,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg16_latencies() {
        let b = build_schedule(16, 80, ScheduleMode::Baseline).unwrap();
        assert_eq!(b.latency(), 1280);
        let ef = build_schedule(16, 80, ScheduleMode::EarlyFiring).unwrap();
        assert_eq!(ef.latency(), 680);
    }

    #[test]
    fn single_layer_has_no_overlap() {
        for mode in [ScheduleMode::Baseline, ScheduleMode::EarlyFiring] {
            assert_eq!(build_schedule(1, 80, mode).unwrap().latency(), 80);
        }
    }

    #[test]
    fn odd_window_rejected_for_early_firing() {
        assert!(matches!(
            build_schedule(3, 81, ScheduleMode::EarlyFiring),
            Err(Error::OddTimeWindow(81))
        ));
        assert!(build_schedule(3, 81, ScheduleMode::Baseline).is_ok());
    }

    #[test]
    fn windows_chain_on_previous_fire_phase() {
        for mode in [ScheduleMode::Baseline, ScheduleMode::EarlyFiring] {
            let s = build_schedule(5, 20, mode).unwrap();
            let mut prev = s.input_window();
            for w in &s.layers {
                assert_eq!(w.integration_start, prev.fire_start);
                assert_eq!(w.fire_end - w.fire_start, 20);
                assert!(w.fire_start >= w.integration_start);
                prev = *w;
            }
        }
    }

    #[test]
    fn latency_identities() {
        for l in 1..=32usize {
            for t in (2..=160u32).step_by(2) {
                let b = build_schedule(l, t, ScheduleMode::Baseline).unwrap();
                assert_eq!(b.latency(), l as u32 * t);
                let ef = build_schedule(l, t, ScheduleMode::EarlyFiring).unwrap();
                assert_eq!(ef.latency(), t + (l as u32 - 1) * t / 2);
            }
        }
    }

    #[test]
    fn mode_parses() {
        assert_eq!("baseline".parse::<ScheduleMode>().unwrap(), ScheduleMode::Baseline);
        assert_eq!(
            "early-firing".parse::<ScheduleMode>().unwrap(),
            ScheduleMode::EarlyFiring
        );
        assert!("fast".parse::<ScheduleMode>().is_err());
    }
}
