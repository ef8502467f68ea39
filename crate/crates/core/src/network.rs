use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};

/// Default time window per phase, in time steps.
pub const DEFAULT_TIME_WINDOW: u32 = 80;

/// Default threshold constant. Activations are normalized to [0, 1], so a
/// unit threshold covers the whole range.
pub const DEFAULT_THETA0: f64 = 1.0;

/// Time constant and delay of one exponential kernel,
/// `eps(dt) = exp(-(dt - t_d) / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub tau: f64,
    pub t_d: f64,
}

impl KernelParams {
    pub const fn new(tau: f64, t_d: f64) -> Self {
        KernelParams { tau, t_d }
    }

    /// Starting point before optimization: `tau = T/4`, no delay.
    pub fn initial(time_window: u32) -> Self {
        KernelParams::new(f64::from(time_window) / 4.0, 0.0)
    }

    /// Clamp into the valid region: `tau >= tau_floor`, `t_d` in `[0, T)`.
    pub fn clamped(self, tau_floor: f64, time_window: u32) -> Self {
        let upper = f64::from(time_window).next_down();
        KernelParams {
            tau: self.tau.max(tau_floor),
            t_d: self.t_d.clamp(0.0, upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub time_window: u32,
    pub theta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyNetwork,
    ZeroTimeWindow,
    NonPositiveTheta0(f64),
    NonPositiveTau {
        layer: usize,
        tau: f64,
    },
    DelayOutOfRange {
        layer: usize,
        t_d: f64,
        window: u32,
    },
    BadGeometry {
        layer: usize,
    },
    WeightLength {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    BiasLength {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    ShapeChain {
        layer: usize,
        prev_out: Vec<usize>,
        next_in: Vec<usize>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyNetwork => write!(f, "network has no layers"),
            Violation::ZeroTimeWindow => write!(f, "time window must be positive"),
            Violation::NonPositiveTheta0(v) => write!(f, "theta0 must be positive (got {v})"),
            Violation::NonPositiveTau { layer, tau } => {
                write!(f, "layer {layer}: tau must be positive (got {tau})")
            }
            Violation::DelayOutOfRange { layer, t_d, window } => {
                write!(f, "layer {layer}: t_d must lie in [0, {window}) (got {t_d})")
            }
            Violation::BadGeometry { layer } => {
                write!(f, "layer {layer}: conv geometry does not match its shapes")
            }
            Violation::WeightLength {
                layer,
                expected,
                actual,
            } => write!(f, "layer {layer}: expected {expected} weights, found {actual}"),
            Violation::BiasLength {
                layer,
                expected,
                actual,
            } => write!(f, "layer {layer}: expected {expected} biases, found {actual}"),
            Violation::ShapeChain {
                layer,
                prev_out,
                next_in,
            } => write!(
                f,
                "layer {layer}: shape chain broken, previous output {prev_out:?} does not feed input {next_in:?}"
            ),
        }
    }
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, time_window: u32) -> Self {
        NetworkSpec {
            layers,
            time_window,
            theta0: DEFAULT_THETA0,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, LayerSpec::in_len)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, LayerSpec::out_len)
    }

    /// Neurons that can fire in TTFS mode: the input encoders and every hidden layer.
    pub fn firing_neurons(&self) -> usize {
        self.input_len() + self.hidden_neurons()
    }

    pub fn hidden_neurons(&self) -> usize {
        let n = self.layers.len();
        self.layers[..n.saturating_sub(1)].iter().map(LayerSpec::out_len).sum()
    }

    pub fn kernels(&self) -> Vec<KernelParams> {
        self.layers.iter().map(|l| l.kernel).collect()
    }

    pub fn set_kernels(&mut self, kernel: KernelParams) {
        for l in &mut self.layers {
            l.kernel = kernel;
        }
    }

    /// Switch to another time window, clamping delays into the new range.
    pub fn with_time_window(mut self, time_window: u32) -> Self {
        self.time_window = time_window;
        for l in &mut self.layers {
            l.kernel = KernelParams {
                tau: l.kernel.tau,
                t_d: l.kernel.t_d.clamp(0.0, f64::from(time_window).next_down()),
            };
        }
        self
    }

    /// Every violated invariant, in layer order. Empty means the network is valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.layers.is_empty() {
            out.push(Violation::EmptyNetwork);
        }
        if self.time_window == 0 {
            out.push(Violation::ZeroTimeWindow);
        }
        if !(self.theta0 > 0.0) {
            out.push(Violation::NonPositiveTheta0(self.theta0));
        }
        let window = f64::from(self.time_window);
        for (idx, layer) in self.layers.iter().enumerate() {
            let k = layer.kernel;
            if !(k.tau > 0.0) {
                out.push(Violation::NonPositiveTau { layer: idx, tau: k.tau });
            }
            if !(k.t_d >= 0.0 && k.t_d < window) {
                out.push(Violation::DelayOutOfRange {
                    layer: idx,
                    t_d: k.t_d,
                    window: self.time_window,
                });
            }
            if let LayerKind::Conv2d(g) = layer.kind {
                let ok = layer.in_shape.len() == 3
                    && layer.in_shape[0] == g.in_channels
                    && g.output_shape(layer.in_shape[1], layer.in_shape[2])
                        .is_some_and(|s| s[..] == layer.out_shape[..]);
                if !ok {
                    out.push(Violation::BadGeometry { layer: idx });
                }
            }
            let expected = layer.expected_weight_len();
            if layer.weights.len() != expected {
                out.push(Violation::WeightLength {
                    layer: idx,
                    expected,
                    actual: layer.weights.len(),
                });
            }
            let expected = layer.expected_bias_len();
            if layer.bias.len() != expected {
                out.push(Violation::BiasLength {
                    layer: idx,
                    expected,
                    actual: layer.bias.len(),
                });
            }
            if idx > 0 {
                let prev = &self.layers[idx - 1];
                if !shapes_chain(prev, layer) {
                    out.push(Violation::ShapeChain {
                        layer: idx,
                        prev_out: prev.out_shape.clone(),
                        next_in: layer.in_shape.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(v))
        }
    }
}

/// A dense layer flattens whatever precedes it; a conv layer needs the exact
/// `[c, h, w]` shape.
fn shapes_chain(prev: &LayerSpec, next: &LayerSpec) -> bool {
    match next.kind {
        LayerKind::Dense => prev.out_len() == next.in_len() && next.in_len() > 0,
        LayerKind::Conv2d(_) => prev.out_shape == next.in_shape,
    }
}
