//! Exponential kernel, dynamic threshold, spike-time encoder and PSP decoder.
//!
//! Time is a discrete grid. A value `u` is encoded as the first offset `t` in
//! the fire window with `u >= theta0 * eps(t)`, and decoded by the receiving
//! layer as `eps(t)`, so every round trip rounds the value down onto the
//! kernel's grid `{eps(0), eps(1), ..., eps(T-1)}`.

use crate::network::KernelParams;

/// `exp(-(dt - t_d) / tau)`.
#[inline]
pub fn kernel_value(k: KernelParams, dt: u32) -> f64 {
    (-(f64::from(dt) - k.t_d) / k.tau).exp()
}

/// Threshold of the fire phase `dt` steps after it started.
#[inline]
pub fn dynamic_threshold(k: KernelParams, theta0: f64, dt: u32) -> f64 {
    theta0 * kernel_value(k, dt)
}

/// Raw `ceil(-tau * ln(u / theta0) + t_d)` with no clamping or range check.
/// `None` for `u <= 0` (or NaN), where the logarithm is undefined.
pub fn closed_form_spike_time(u: f64, k: KernelParams, theta0: f64) -> Option<i64> {
    if !(u > 0.0) {
        return None;
    }
    let t = (-k.tau * (u / theta0).ln() + k.t_d).ceil();
    // saturating cast: +inf/huge map to i64::MAX
    Some(t as i64)
}

/// Spike offset in `[0, T)` for membrane potential `u` with `theta0 = 1`.
///
/// Returns the smallest offset satisfying the firing condition
/// `u >= dynamic_threshold(k, 1, t)`. The closed form gives the answer up to
/// rounding at exact threshold equality; one comparison on each side pins it
/// to the firing condition. Potentials above the kernel's maximum fire at
/// offset 0; potentials that never cross within the window give `None`.
pub fn encode_spike_time(u: f64, k: KernelParams, time_window: u32) -> Option<u32> {
    encode_with_threshold(u, k, 1.0, time_window)
}

pub fn encode_with_threshold(u: f64, k: KernelParams, theta0: f64, time_window: u32) -> Option<u32> {
    let raw = closed_form_spike_time(u, k, theta0)?;
    if time_window == 0 {
        return None;
    }
    let mut t = raw.clamp(0, i64::from(time_window)) as u32;
    while t > 0 && u >= dynamic_threshold(k, theta0, t - 1) {
        t -= 1;
    }
    while t < time_window && u < dynamic_threshold(k, theta0, t) {
        t += 1;
    }
    (t < time_window).then_some(t)
}

/// Postsynaptic potential of one spike through a synapse of weight `w`.
/// `k_in` must be the presynaptic layer's fire kernel.
#[inline]
pub fn decode_psp(w: f64, spike_offset: u32, k_in: KernelParams) -> f64 {
    w * kernel_value(k_in, spike_offset)
}

/// Round trip with matched kernels: `eps(encode(u))`, or 0 when `u` produces no spike.
pub fn roundtrip(u: f64, k: KernelParams, time_window: u32) -> f64 {
    encode_spike_time(u, k, time_window).map_or(0.0, |t| kernel_value(k, t))
}

/// Worst-case gap between a value and its decoded reconstruction `x_hat`:
/// `x_hat * (exp(1/tau) - 1)`.
#[inline]
pub fn precision_error_bound(x_hat: f64, tau: f64) -> f64 {
    x_hat * (1.0 / tau).exp_m1()
}

/// `(exp(-(T - t_d)/tau), exp(t_d/tau))`: the smallest and largest values the
/// kernel covers over a window of `T` steps.
pub fn representable_range(k: KernelParams, time_window: u32) -> (f64, f64) {
    let t = f64::from(time_window);
    ((-(t - k.t_d) / k.tau).exp(), (k.t_d / k.tau).exp())
}

/// `eps(0), ..., eps(T-1)`.
pub fn kernel_table(k: KernelParams, time_window: u32) -> Vec<f64> {
    (0..time_window).map(|t| kernel_value(k, t)).collect()
}
