//! Time-to-first-spike conversion and simulation of ReLU networks.
//!
//! A trained ReLU network is normalized ([`conversion`]), each layer gets an
//! exponential kernel that doubles as a dynamic firing threshold and as the
//! dendritic decoder ([`codec`]), the kernels are fitted to recorded
//! activations ([`kopt`]), and the result runs on a discrete-time simulator
//! under a baseline or early-firing phase schedule ([`simulator`],
//! [`schedule`]). [`metrics`] turns runs into spike, latency and energy figures.

pub mod codec;
pub mod conversion;
pub mod data;
pub mod dnn;
pub mod error;
pub mod kopt;
pub mod layer;
pub mod metrics;
pub mod network;
pub mod schedule;
pub mod serialize;
pub mod simulator;
pub mod state;

pub use error::{Error, Result};
pub use layer::{ConvGeometry, LayerKind, LayerSpec};
pub use network::{KernelParams, NetworkSpec, DEFAULT_THETA0, DEFAULT_TIME_WINDOW};
pub use schedule::{build_schedule, PhaseSchedule, ScheduleMode};
