//! Finite-difference oracle for the kernel-loss gradients, with spike times
//! frozen at the evaluation point.

use rand::Rng;
use ttfs_core::codec::encode_spike_time;
use ttfs_core::kopt::{grad_tau_min, grad_tau_precision, grad_td};
use ttfs_core::KernelParams;

pub const STEP: f64 = 1e-6;

pub fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// `L(p + h) - L(p - h)` for `L = 0.5 * (z - exp(g(p)))^2`, given
/// `e_lo = exp(g(p - h))` and `dg = g(p + h) - g(p - h)`. Written so that no
/// two nearly equal quantities are subtracted: the quotient keeps full
/// relative precision even when the kernel value underflows towards 1e-300.
fn term_difference(z: f64, e_lo: f64, dg: f64) -> f64 {
    let d = e_lo * dg.exp_m1(); // e_hi - e_lo
    let e_hi = e_lo + d;
    -0.5 * d * (2.0 * z - e_hi - e_lo)
}

/// `exp(-a / tau)` terms: `g(tau) = -a / tau`.
fn tau_term(z: f64, a: f64, tau: f64) -> f64 {
    let h = STEP;
    let dg = 2.0 * a * h / (tau * tau - h * h);
    term_difference(z, (-a / (tau - h)).exp(), dg) / (2.0 * h)
}

/// Central difference in `tau` of the precision loss with spike times frozen.
pub fn precision_quotient(spikes: &[(f64, u32)], k: KernelParams) -> f64 {
    let sum: f64 = spikes
        .iter()
        .map(|&(z, t)| tau_term(z, f64::from(t) - k.t_d, k.tau))
        .sum();
    sum / spikes.len() as f64
}

pub fn min_quotient(zmin: f64, k: KernelParams, window: u32) -> f64 {
    tau_term(zmin, f64::from(window) - k.t_d, k.tau)
}

pub fn max_quotient(zmax: f64, k: KernelParams) -> f64 {
    let h = STEP;
    term_difference(zmax, ((k.t_d - h) / k.tau).exp(), 2.0 * h / k.tau) / (2.0 * h)
}

/// Precision loss with every spike time held fixed.
pub fn frozen_precision(spikes: &[(f64, u32)], k: KernelParams) -> f64 {
    let sum: f64 = spikes
        .iter()
        .map(|&(z, t)| {
            let zh = (-(f64::from(t) - k.t_d) / k.tau).exp();
            0.5 * (z - zh) * (z - zh)
        })
        .sum();
    sum / spikes.len() as f64
}

pub fn min_loss(zmin: f64, k: KernelParams, window: u32) -> f64 {
    let zh = (-(f64::from(window) - k.t_d) / k.tau).exp();
    0.5 * (zmin - zh) * (zmin - zh)
}

pub fn max_loss(zmax: f64, k: KernelParams) -> f64 {
    let zh = (k.t_d / k.tau).exp();
    0.5 * (zmax - zh) * (zmax - zh)
}

#[derive(Debug, Clone)]
pub struct Case {
    pub zbar: Vec<f64>,
    pub zmax: f64,
    pub k: KernelParams,
    pub window: u32,
}

pub fn random_case(rng: &mut impl Rng) -> Case {
    let window = rng.random_range(4..=200u32);
    let tau = rng.random_range(0.5..(f64::from(window) / 2.0));
    let t_d = rng.random_range(0.0..f64::from(window) / 4.0);
    let n = rng.random_range(1..=32);
    let zbar = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..0.2))).collect();
    Case {
        zbar,
        zmax: rng.random_range(0.05..2.0),
        k: KernelParams::new(tau, t_d),
        window,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Relative errors of the precision, minimum and delay gradients against
/// central differences, or `None` if no value of the case produces a spike.
pub fn relative_errors(c: &Case) -> Option<[f64; 3]> {
    let spikes: Vec<(f64, u32)> = c
        .zbar
        .iter()
        .filter_map(|&z| encode_spike_time(z, c.k, c.window).map(|t| (z, t)))
        .collect();
    if spikes.is_empty() {
        return None;
    }
    let zmin = c.zbar.iter().copied().fold(f64::INFINITY, f64::min);
    let prec = precision_quotient(&spikes, c.k);
    let min = min_quotient(zmin, c.k, c.window);
    let td = max_quotient(c.zmax, c.k);
    Some([
        rel(grad_tau_precision(&c.zbar, c.k, c.window), prec),
        rel(grad_tau_min(zmin, c.k, c.window), min),
        rel(grad_td(c.zmax, c.k), td),
    ])
}
