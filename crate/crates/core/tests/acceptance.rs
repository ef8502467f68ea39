//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! (written straight to stderr so it shows without `--nocapture`); the test
//! fails if any criterion fails.
//!
//! Criteria 5 and 6 need MNIST in IDX format under `data/mnist` at the
//! workspace root, or wherever `TTFS_MNIST_DIR` points.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfs_core::codec::{
    closed_form_spike_time, decode_psp, dynamic_threshold, encode_spike_time, kernel_value, precision_error_bound,
    representable_range,
};
use ttfs_core::conversion::convert;
use ttfs_core::data::{default_mnist_dir, Dataset};
use ttfs_core::dnn::{accuracy, init_mlp, record_stats, train, Normalization, TrainConfig, ValueHistogram};
use ttfs_core::kopt::{grad_tau_min, grad_tau_precision, optimize, optimize_kernel, IterationRecord, KoptConfig};
use ttfs_core::metrics::{estimate_energy, SPINNAKER, TRUENORTH};
use ttfs_core::simulator::{classify_batch, Coding, RunOptions};
use ttfs_core::*;

mod common;
use common::fd;

// Pinned tolerances and sizes.
const FD_DRAWS: usize = 1000;
const FD_REL_TOL: f64 = 1e-5;
const ROUNDTRIP_DRAWS: usize = 10_000;
const SCAN_DRAWS: usize = 10_000;
const SCAN_DISAGREE_FRACTION: f64 = 0.001;
const TRAIN_EPOCHS: usize = 10;
const TRAIN_LR: f64 = 0.1;
const TRAIN_BATCH: usize = 32;
const DNN_MIN_ACC: f64 = 0.97;
const ACC_GAP: f64 = 0.01;
const SPIKE_RATIO: f64 = 20.0;
const RATE_STEPS: u32 = 500;
const MNIST_T: u32 = 80;
const PERCENTILE: f64 = 99.9;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{status} criterion {}: {}", o.id, o.detail);
}

fn latency_identities() -> Outcome {
    let b = build_schedule(16, 80, ScheduleMode::Baseline).unwrap().latency();
    let e = build_schedule(16, 80, ScheduleMode::EarlyFiring).unwrap().latency();
    let mut bad = 0;
    for l in 1..=32u32 {
        for t in (2..=160u32).step_by(2) {
            let lb = build_schedule(l as usize, t, ScheduleMode::Baseline).unwrap().latency();
            let le = build_schedule(l as usize, t, ScheduleMode::EarlyFiring)
                .unwrap()
                .latency();
            if lb != l * t || le != t + (l - 1) * t / 2 {
                bad += 1;
            }
        }
    }
    Outcome {
        id: "1",
        pass: b == 1280 && e == 680 && bad == 0,
        detail: format!(
            "L=16 T=80 latency baseline {b}, early firing {e}; {bad} identity failures over L<=32, even T<=160"
        ),
    }
}

fn gradient_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfd);
    let mut worst = [0.0f64; 3];
    let mut draws = 0;
    while draws < FD_DRAWS {
        if let Some(errs) = fd::relative_errors(&fd::random_case(&mut rng)) {
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
            draws += 1;
        }
    }
    Outcome {
        id: "2",
        pass: worst.iter().all(|&e| e <= FD_REL_TOL),
        detail: format!(
            "{draws} draws, step {:e}; worst relative error tau/precision {:.2e}, tau/min {:.2e}, t_d/max {:.2e} (tol {FD_REL_TOL:e})",
            fd::STEP,
            worst[0],
            worst[1],
            worst[2]
        ),
    }
}

fn roundtrip_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0);
    let (mut violations, mut gap, mut gap_violations) = (0, 0, 0);
    for _ in 0..ROUNDTRIP_DRAWS {
        let window = rng.random_range(2..=200u32);
        let tau = rng.random_range(0.5..f64::from(window));
        let t_d = rng.random_range(0.0..f64::from(window) / 2.0);
        let k = KernelParams::new(tau, t_d);
        let (lo, hi) = representable_range(k, window);
        let u = lo * (hi / lo).powf(rng.random::<f64>());
        if !(u > lo && u <= hi) {
            continue;
        }
        match encode_spike_time(u, k, window) {
            Some(t) => {
                let x_hat = decode_psp(1.0, t, k);
                if (u - x_hat).abs() > precision_error_bound(x_hat, tau) {
                    violations += 1;
                }
            }
            None => {
                gap += 1;
                // below the last grid point: no spike, error u itself
                if !(u < dynamic_threshold(k, 1.0, window - 1) && u <= kernel_value(k, window - 1)) {
                    gap_violations += 1;
                }
            }
        }
    }
    Outcome {
        id: "3",
        pass: violations == 0 && gap_violations == 0,
        detail: format!(
            "{ROUNDTRIP_DRAWS} draws: {violations} bound violations; {gap} draws fell between exp(-(T-t_d)/tau) and eps(T-1) \
             (no spike, error < eps(T-1)), {gap_violations} of those misplaced"
        ),
    }
}

fn scan(u: f64, k: KernelParams, window: u32) -> Option<u32> {
    (0..window).find(|&t| u >= dynamic_threshold(k, 1.0, t))
}

/// Raw `ceil` formula clipped to the window, as written, without fix-ups.
fn closed_form_in_window(u: f64, k: KernelParams, window: u32) -> Option<u32> {
    closed_form_spike_time(u, k, 1.0)
        .map(|t| t.max(0))
        .filter(|&t| t < i64::from(window))
        .map(|t| t as u32)
}

/// `u` sits on the threshold of one of the offsets involved, up to rounding.
fn on_boundary(u: f64, k: KernelParams, window: u32, offsets: [Option<u32>; 2]) -> bool {
    offsets
        .into_iter()
        .flatten()
        .flat_map(|t| [t.checked_sub(1), Some(t), Some(t + 1)])
        .flatten()
        .filter(|&t| t < window)
        .any(|t| (u - dynamic_threshold(k, 1.0, t)).abs() <= 1e-12 * u)
}

fn within_one_step(closed: Option<u32>, brute: Option<u32>, window: u32) -> bool {
    match (closed, brute) {
        (Some(a), Some(b)) => a.abs_diff(b) <= 1,
        (None, Some(b)) | (Some(b), None) => b + 1 == window,
        (None, None) => true,
    }
}

fn random_kernel(rng: &mut impl Rng) -> (KernelParams, u32) {
    let window = rng.random_range(1..=200u32);
    let k = KernelParams::new(rng.random_range(0.2..50.0), rng.random_range(0.0..f64::from(window)));
    (k, window)
}

fn encoder_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe7);
    let (mut disagree, mut off_boundary, mut far, mut encoder_disagree) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..SCAN_DRAWS {
        let (k, window) = random_kernel(&mut rng);
        let u = rng.random_range(0.0..1.5);
        let brute = scan(u, k, window);
        let closed = closed_form_in_window(u, k, window);
        if closed != brute {
            disagree += 1;
            off_boundary += usize::from(!on_boundary(u, k, window, [closed, brute]));
            far += usize::from(!within_one_step(closed, brute, window));
        }
        encoder_disagree += usize::from(encode_spike_time(u, k, window) != brute);
    }
    // stress: values placed exactly on grid points
    let (mut grid_disagree, mut grid_far, mut grid_encoder) = (0usize, 0usize, 0usize);
    const GRID_DRAWS: usize = 1000;
    for _ in 0..GRID_DRAWS {
        let (k, window) = random_kernel(&mut rng);
        let u = kernel_value(k, rng.random_range(0..window));
        let brute = scan(u, k, window);
        let closed = closed_form_in_window(u, k, window);
        if closed != brute {
            grid_disagree += 1;
            grid_far += usize::from(!within_one_step(closed, brute, window));
        }
        grid_encoder += usize::from(encode_spike_time(u, k, window) != brute);
    }
    let frac = disagree as f64 / SCAN_DRAWS as f64;
    Outcome {
        id: "4",
        pass: frac <= SCAN_DISAGREE_FRACTION
            && off_boundary == 0
            && far == 0
            && encoder_disagree == 0
            && grid_far == 0
            && grid_encoder == 0,
        detail: format!(
            "{SCAN_DRAWS} random draws: raw ceil formula differs from the threshold scan on {disagree} ({:.3}%, \
             {off_boundary} off the equality boundary, {far} beyond one step), encoder differs on {encoder_disagree}; \
             {GRID_DRAWS} exact grid-point draws: raw formula differs on {grid_disagree} ({grid_far} beyond one step), \
             encoder differs on {grid_encoder}",
            100.0 * frac
        ),
    }
}

fn fine_grained(seed: u64, tail: f64) -> ValueHistogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..50_000)
        .map(|_| (-0.2 * (1.0 - rng.random::<f64>()).ln()).min(tail) + 1e-4)
        .collect();
    ValueHistogram::from_values(&values)
}

fn optimizer_trajectories() -> Outcome {
    let cfg = KoptConfig::default();
    let hist = fine_grained(1, 1.3);
    let up: Vec<IterationRecord> = optimize_kernel(&hist, KernelParams::new(2.0, 0.0), 20, &cfg, 0)
        .unwrap()
        .1;
    let first = &up[..=50];
    let tau_rises = first.windows(2).all(|w| w[1].kernel.tau > w[0].kernel.tau);
    let prec_falls = first[50].loss.l_prec < first[0].loss.l_prec;
    let lmax_falls = first.windows(2).all(|w| w[1].loss.l_max < w[0].loss.l_max);

    let hist_small = fine_grained(2, 1.0);
    let start = KernelParams::new(18.0, 0.0);
    let down = optimize_kernel(&hist_small, start, 20, &cfg, 0).unwrap().1;
    let end = down.last().unwrap();
    let probe: Vec<f64> = hist_small.weighted_midpoints().iter().map(|p| p.0).collect();
    let g_min = grad_tau_min(hist_small.min_positive, start, 20);
    let g_prec = grad_tau_precision(&probe, start, 20);
    let tau_falls =
        end.kernel.tau < start.tau && end.loss.l_min < down[0].loss.l_min && g_min > 0.0 && g_min > g_prec.abs();

    Outcome {
        id: "7",
        pass: tau_rises && prec_falls && lmax_falls && tau_falls,
        detail: format!(
            "from tau=2: tau {:.4} -> {:.4} over 50 its (strictly rising: {tau_rises}), l_prec {:.3e} -> {:.3e}, \
             l_max {:.4} -> {:.4} (strictly falling: {lmax_falls}); from tau=18: tau -> {:.3}, l_min {:.3e} -> {:.3e} \
             (d l_min/d tau {:.2e} vs d l_prec/d tau {:.2e})",
            first[0].kernel.tau,
            first[50].kernel.tau,
            first[0].loss.l_prec,
            first[50].loss.l_prec,
            first[0].loss.l_max,
            first[50].loss.l_max,
            end.kernel.tau,
            down[0].loss.l_min,
            end.loss.l_min,
            g_min,
            g_prec
        ),
    }
}

fn energy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe0);
    let mut mismatches = 0;
    for _ in 0..100 {
        let s: u64 = rng.random_range(0..10_000_000);
        let l: u64 = rng.random_range(0..100_000);
        if estimate_energy(s, l, TRUENORTH) != s as f64 * 0.4 + l as f64 * 0.6 {
            mismatches += 1;
        }
        if estimate_energy(s, l, SPINNAKER) != s as f64 * 0.64 + l as f64 * 0.36 {
            mismatches += 1;
        }
    }
    Outcome {
        id: "8",
        pass: mismatches == 0,
        detail: format!("100 random (spikes, latency) pairs, both presets: {mismatches} inexact results"),
    }
}

struct Mnist {
    train: Dataset,
    test: Dataset,
}

fn load_mnist() -> std::result::Result<Mnist, String> {
    let dir = default_mnist_dir();
    let load =
        |train| Dataset::load_mnist(&dir, train).map_err(|e| format!("MNIST unavailable at {}: {e}", dir.display()));
    Ok(Mnist {
        train: load(true)?,
        test: load(false)?,
    })
}

fn mnist_criteria() -> Vec<Outcome> {
    let data = match load_mnist() {
        Ok(d) => d,
        Err(e) => {
            return ["5", "6"]
                .into_iter()
                .map(|id| Outcome {
                    id,
                    pass: false,
                    detail: e.clone(),
                })
                .collect()
        }
    };
    let clock = Instant::now();
    let net = init_mlp(&[784, 300, 10], 1, MNIST_T);
    let cfg = TrainConfig {
        learning_rate: TRAIN_LR,
        epochs: TRAIN_EPOCHS,
        batch_size: TRAIN_BATCH,
        rng_seed: 1,
    };
    let (net, _) = train(&net, &data.train, &cfg).unwrap();
    let dnn_acc = accuracy(&net, &data.test).unwrap();

    let stats = record_stats(&net, &data.train, Normalization::Percentile(PERCENTILE)).unwrap();
    let converted = convert(&net, &stats, KernelParams::initial(MNIST_T)).unwrap();
    let (optimized, _) = optimize(&converted, &stats.rescaled(), &KoptConfig::default()).unwrap();

    let ef = build_schedule(2, MNIST_T, ScheduleMode::EarlyFiring).unwrap();
    let base = build_schedule(2, MNIST_T, ScheduleMode::Baseline).unwrap();
    let opts = RunOptions::default();
    let run = |n: &NetworkSpec, s: &PhaseSchedule, c: Coding| classify_batch(n, &data.test, s, c, &opts).unwrap();
    let ef_opt = run(&optimized, &ef, Coding::Ttfs);
    let ef_init = run(&converted, &ef, Coding::Ttfs);
    let base_opt = run(&optimized, &base, Coding::Ttfs);
    let base_init = run(&converted, &base, Coding::Ttfs);
    let rate = run(&converted, &base, Coding::Rate(RATE_STEPS));

    let hidden = optimized.hidden_neurons() as u64;
    let max_hidden = [&ef_opt, &ef_init, &base_opt, &base_init]
        .iter()
        .map(|o| o.max_hidden_spikes)
        .max()
        .unwrap();
    let ratio = rate.mean_spikes / ef_opt.mean_spikes;
    let rate_gap = (dnn_acc - rate.accuracy).abs();
    let c5 = Outcome {
        id: "5",
        pass: max_hidden <= hidden && ratio >= SPIKE_RATIO && rate_gap <= ACC_GAP,
        detail: format!(
            "max hidden spikes per input {max_hidden} <= {hidden} neurons over 4x{} TTFS runs; rate coding (T={RATE_STEPS}) \
             {:.1} spikes/inference at {:.2}% vs TTFS early firing {:.1} at {:.2}%: ratio {ratio:.0}x (need >= {SPIKE_RATIO}x, \
             rate within {:.1} pt of DNN: {:.2} pt)",
            data.test.len(),
            rate.mean_spikes,
            100.0 * rate.accuracy,
            ef_opt.mean_spikes,
            100.0 * ef_opt.accuracy,
            100.0 * ACC_GAP,
            100.0 * rate_gap
        ),
    };
    let gap = dnn_acc - ef_opt.accuracy;
    let c6 = Outcome {
        id: "6",
        pass: dnn_acc >= DNN_MIN_ACC && gap <= ACC_GAP,
        detail: format!(
            "DNN 784-300-10 test accuracy {:.2}% (need >= {:.0}%); optimized kernels {:?}; early firing (latency {}) {:.2}%, \
             gap {:.2} pt (need <= {:.1}); baseline (latency {}) {:.2}%; {:.0}s",
            100.0 * dnn_acc,
            100.0 * DNN_MIN_ACC,
            optimized.kernels().iter().map(|k| (k.tau, k.t_d)).collect::<Vec<_>>(),
            ef.latency(),
            100.0 * ef_opt.accuracy,
            100.0 * gap,
            100.0 * ACC_GAP,
            base.latency(),
            100.0 * base_opt.accuracy,
            clock.elapsed().as_secs_f64()
        ),
    };
    let fewer = ef_opt.mean_spikes <= ef_init.mean_spikes && base_opt.mean_spikes <= base_init.mean_spikes;
    let c_spikes = Outcome {
        id: "6+ (optimizer does not add spikes)",
        pass: fewer,
        detail: format!(
            "mean spikes before/after kernel optimization: early firing {:.2} -> {:.2}, baseline {:.2} -> {:.2}",
            ef_init.mean_spikes, ef_opt.mean_spikes, base_init.mean_spikes, base_opt.mean_spikes
        ),
    };
    vec![c5, c6, c_spikes]
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        latency_identities(),
        gradient_agreement(),
        roundtrip_bound(),
        encoder_equivalence(),
    ];
    outcomes.iter().for_each(line);
    let mnist = mnist_criteria();
    mnist.iter().for_each(line);
    let tail = vec![optimizer_trajectories(), energy_oracle()];
    tail.iter().for_each(line);
    outcomes.extend(mnist);
    outcomes.extend(tail);
    let _ = writeln!(
        std::io::stderr(),
        "INFO criterion 9: CIFAR-10/100 VGG-16 results are out of desk scale; criteria 1-8 cover the formulas they rest on"
    );
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
