use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ttfs_core::codec::kernel_table;
use ttfs_core::data::Dataset;
use ttfs_core::dnn::{accuracy, init_mlp, init_toy_cnn, record_stats, train as train_net, Normalization, TrainConfig};
use ttfs_core::kopt::{self, KoptConfig};
use ttfs_core::metrics::{format_table, summarize, SummaryOptions};
use ttfs_core::serialize::{load_model, save_model, Model};
use ttfs_core::simulator::{
    checkpoint_grid, classify_batch, run_ttfs_with, write_trace_csv, Coding, Engine, RunOptions,
};
use ttfs_core::{build_schedule, conversion, KernelParams, NetworkSpec, ScheduleMode, DEFAULT_TIME_WINDOW};

use crate::config::Config;
use crate::{ConvertArgs, OptimizeArgs, RunArgs, TrainArgs};

const DEFAULT_DATA_DIR: &str = "data/mnist";

const TRAIN_KEYS: &[&str] = &[
    "data_dir",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "arch",
    "hidden",
    "channels",
    "epochs",
    "batch",
    "lr",
    "seed",
    "max_train",
    "max_test",
    "out",
];
const CONVERT_KEYS: &[&str] = &["model", "out", "time_window", "tau", "td", "normalization"];
const OPTIMIZE_KEYS: &[&str] = &[
    "model",
    "out",
    "lr",
    "iters",
    "batch",
    "tau_floor",
    "divergence_limit",
    "seed",
    "loss_csv",
];
const RUN_KEYS: &[&str] = &[
    "model",
    "data_dir",
    "images",
    "labels",
    "schedule",
    "coding",
    "t",
    "time_window",
    "engine",
    "trace",
    "trace_sample",
    "report",
    "curve",
    "kernel_table",
    "limit",
    "exclude_input_spikes",
];

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<usize>()
                .map_err(|e| anyhow!("{what}: cannot parse {x:?}: {e}"))
        })
        .collect()
}

/// Images and labels from explicit paths, or from the standard MNIST names in `dir`.
fn load_split(images: Option<PathBuf>, labels: Option<PathBuf>, dir: &Path, prefix: &str) -> Result<Dataset> {
    let images = images.unwrap_or_else(|| dir.join(format!("{prefix}-images-idx3-ubyte")));
    let labels = labels.unwrap_or_else(|| dir.join(format!("{prefix}-labels-idx1-ubyte")));
    Ok(Dataset::load_idx(&images, &labels)?)
}

fn limit(data: Dataset, n: Option<usize>) -> Dataset {
    match n {
        Some(n) if n < data.len() => data.take(n),
        _ => data,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn require_stats(model: &Model, path: &Path) -> Result<()> {
    if model.stats.is_none() {
        bail!(
            "{} holds no activation statistics; produce it with `ttfs-sim train`",
            path.display()
        );
    }
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = Config::from_arg(a.config.as_deref())?;
    cfg.check_keys(TRAIN_KEYS)?;
    let out: PathBuf = cfg.require(a.out.clone(), "out")?;
    let dir: PathBuf = cfg.pick_or(a.data_dir.clone(), "data_dir", PathBuf::from(DEFAULT_DATA_DIR))?;
    let train_set = load_split(
        cfg.pick(a.train_images.clone(), "train_images")?,
        cfg.pick(a.train_labels.clone(), "train_labels")?,
        &dir,
        "train",
    )?;
    let test_set = load_split(
        cfg.pick(a.test_images.clone(), "test_images")?,
        cfg.pick(a.test_labels.clone(), "test_labels")?,
        &dir,
        "t10k",
    )?;
    let train_set = limit(train_set, cfg.pick(a.max_train, "max_train")?);
    let test_set = limit(test_set, cfg.pick(a.max_test, "max_test")?);
    if test_set.dim() != train_set.dim() {
        bail!(
            "train samples have {} values, test samples {}",
            train_set.dim(),
            test_set.dim()
        );
    }

    let tc = TrainConfig {
        learning_rate: cfg.pick_or(a.lr, "lr", 0.1)?,
        epochs: cfg.pick_or(a.epochs, "epochs", 10)?,
        batch_size: cfg.pick_or(a.batch, "batch", 32)?,
        rng_seed: cfg.pick_or(a.seed, "seed", 1)?,
    };
    let classes = train_set.num_classes().max(test_set.num_classes());
    let arch: String = cfg.pick_or(a.arch.clone(), "arch", "mlp".to_string())?;
    let init = match arch.as_str() {
        "mlp" => {
            let hidden: String = cfg.pick_or(a.hidden.clone(), "hidden", "300".to_string())?;
            let mut sizes = vec![train_set.dim()];
            sizes.extend(parse_list(&hidden, "hidden")?);
            sizes.push(classes);
            if sizes.contains(&0) {
                bail!("layer widths must be positive, got {sizes:?}");
            }
            init_mlp(&sizes, tc.rng_seed, DEFAULT_TIME_WINDOW)
        }
        "cnn" => {
            let channels: String = cfg.pick_or(a.channels.clone(), "channels", "8,16".to_string())?;
            let ch = parse_list(&channels, "channels")?;
            let [c1, c2] = ch[..] else {
                bail!("channels: expected two counts, got {ch:?}");
            };
            let shape = &train_set.sample_shape;
            let [c, h, w] = shape[..] else {
                bail!("cnn needs [channels, rows, cols] samples, got shape {shape:?}");
            };
            init_toy_cnn([c, h, w], [c1, c2], classes, tc.rng_seed, DEFAULT_TIME_WINDOW)
        }
        other => bail!("unknown arch {other:?}; expected mlp or cnn"),
    };

    let (net, log) = train_net(&init, &train_set, &tc)?;
    for e in &log {
        println!(
            "epoch {:>3}  loss {:.4}  train accuracy {:.2}%",
            e.epoch + 1,
            e.loss,
            100.0 * e.train_accuracy
        );
    }
    let stats = record_stats(&net, &train_set, Normalization::Max)?;
    let train_acc = accuracy(&net, &train_set)?;
    let test_acc = accuracy(&net, &test_set)?;
    save_model(
        &out,
        &Model {
            net,
            stats: Some(stats),
        },
    )?;
    println!(
        "train accuracy {:.2}%  test accuracy {:.2}%",
        100.0 * train_acc,
        100.0 * test_acc
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn parse_normalization(s: &str) -> Result<Normalization> {
    if s.eq_ignore_ascii_case("max") {
        return Ok(Normalization::Max);
    }
    let p: f64 = s
        .trim_end_matches('%')
        .parse()
        .map_err(|_| anyhow!("normalization: expected `max` or a percentile, got {s:?}"))?;
    Ok(Normalization::Percentile(p))
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    let cfg = Config::from_arg(a.config.as_deref())?;
    cfg.check_keys(CONVERT_KEYS)?;
    let model_path: PathBuf = cfg.require(a.model.clone(), "model")?;
    let out: PathBuf = cfg.require(a.out.clone(), "out")?;
    let model = load_model(&model_path)?;
    require_stats(&model, &model_path)?;
    let stats = model.stats.as_ref().expect("checked above");

    let window = cfg.pick_or(a.time_window, "time_window", model.net.time_window)?;
    let kernel = KernelParams::new(
        cfg.pick_or(a.tau, "tau", KernelParams::initial(window).tau)?,
        cfg.pick_or(a.td, "td", 0.0)?,
    );
    let normalization: String = cfg.pick_or(a.normalization.clone(), "normalization", "99.9".to_string())?;
    let stats = stats.with_normalization(parse_normalization(&normalization)?)?;

    let mut net = model.net.clone();
    net.time_window = window;
    let net = conversion::convert(&net, &stats, kernel)?;
    for (l, lambda) in stats.lambdas().iter().enumerate() {
        println!("layer {l}: lambda {lambda:.6}");
    }
    save_model(
        &out,
        &Model {
            net,
            stats: Some(stats.rescaled()),
        },
    )?;
    println!(
        "T {window}, kernel tau {} t_d {}; wrote {}",
        kernel.tau,
        kernel.t_d,
        out.display()
    );
    Ok(())
}

pub fn optimize(a: &OptimizeArgs) -> Result<()> {
    let cfg = Config::from_arg(a.config.as_deref())?;
    cfg.check_keys(OPTIMIZE_KEYS)?;
    let model_path: PathBuf = cfg.require(a.model.clone(), "model")?;
    let out: PathBuf = cfg.require(a.out.clone(), "out")?;
    let d = KoptConfig::default();
    let kc = KoptConfig {
        learning_rate: cfg.pick_or(a.lr, "lr", d.learning_rate)?,
        iterations: cfg.pick_or(a.iters, "iters", d.iterations)?,
        batch_size: cfg.pick_or(a.batch, "batch", d.batch_size)?,
        tau_floor: cfg.pick_or(a.tau_floor, "tau_floor", d.tau_floor)?,
        seed: cfg.pick_or(a.seed, "seed", d.seed)?,
        divergence_limit: cfg.pick_or(a.divergence_limit, "divergence_limit", d.divergence_limit)?,
    };
    let loss_csv: Option<PathBuf> = cfg.pick(a.loss_csv.clone(), "loss_csv")?;

    let model = load_model(&model_path)?;
    require_stats(&model, &model_path)?;
    let stats = model.stats.as_ref().expect("checked above");
    let (net, history) = kopt::optimize(&model.net, stats, &kc)?;

    for l in 0..net.layers.len() {
        let recs: Vec<_> = history.iter().filter(|r| r.layer == l).collect();
        let (first, last) = (recs[0], recs[recs.len() - 1]);
        println!(
            "layer {l}: tau {:.4} -> {:.4}, t_d {:.4} -> {:.4}, loss {:.4e} -> {:.4e}",
            first.kernel.tau,
            last.kernel.tau,
            first.kernel.t_d,
            last.kernel.t_d,
            first.loss.total(),
            last.loss.total()
        );
    }
    if let Some(path) = &loss_csv {
        kopt::write_loss_csv(path, &history)?;
    }
    save_model(
        &out,
        &Model {
            net,
            stats: model.stats.clone(),
        },
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn kernel_table_csv(net: &NetworkSpec) -> String {
    let mut s = String::from("layer,t,value\n");
    for (l, layer) in net.layers.iter().enumerate() {
        for (t, v) in kernel_table(layer.kernel, net.time_window).iter().enumerate() {
            let _ = writeln!(s, "{l},{t},{v:e}");
        }
    }
    s
}

pub fn run(a: &RunArgs) -> Result<()> {
    let cfg = Config::from_arg(a.config.as_deref())?;
    cfg.check_keys(RUN_KEYS)?;
    let model_path: PathBuf = cfg.require(a.model.clone(), "model")?;
    let mut net = load_model(&model_path)?.net;

    let dir: PathBuf = cfg.pick_or(a.data_dir.clone(), "data_dir", PathBuf::from(DEFAULT_DATA_DIR))?;
    let data = load_split(
        cfg.pick(a.images.clone(), "images")?,
        cfg.pick(a.labels.clone(), "labels")?,
        &dir,
        "t10k",
    )?;
    let data = limit(data, cfg.pick(a.limit, "limit")?);

    let mode: ScheduleMode = cfg
        .pick_or(a.schedule.clone(), "schedule", "baseline".to_string())?
        .parse()?;
    let coding_name: String = cfg.pick_or(a.coding.clone(), "coding", "ttfs".to_string())?;
    let engine = match cfg
        .pick_or(a.engine.clone(), "engine", "event-driven".to_string())?
        .as_str()
    {
        "event-driven" => Engine::EventDriven,
        "dense" => Engine::Dense,
        other => bail!("unknown engine {other:?}; expected event-driven or dense"),
    };
    let t_flag = match a.time_window {
        Some(t) => Some(t),
        None => cfg.get::<u32>("t")?.or(cfg.get::<u32>("time_window")?),
    };

    let (coding, schedule, method, span) = match coding_name.as_str() {
        "ttfs" => {
            if let Some(t) = t_flag {
                net.time_window = t;
            }
            net.validate()?;
            let schedule = build_schedule(net.num_layers(), net.time_window, mode)?;
            let method = match mode {
                ScheduleMode::Baseline => "ttfs-baseline",
                ScheduleMode::EarlyFiring => "ttfs-early-firing",
            };
            let span = schedule.latency();
            (Coding::Ttfs, schedule, method, span)
        }
        "rate" => {
            net.validate()?;
            let schedule = build_schedule(net.num_layers(), net.time_window, ScheduleMode::Baseline)?;
            let steps = t_flag.unwrap_or_else(|| schedule.latency());
            if steps == 0 {
                bail!("rate coding needs at least one step");
            }
            (Coding::Rate(steps), schedule, "rate", steps)
        }
        other => bail!("unknown coding {other:?}; expected ttfs or rate"),
    };

    if let Some(path) = cfg.pick::<PathBuf>(a.kernel_table.clone(), "kernel_table")? {
        write_file(&path, &kernel_table_csv(&net))?;
    }

    let curve_path: Option<PathBuf> = cfg.pick(a.curve.clone(), "curve")?;
    let opts = RunOptions {
        engine,
        record_trace: false,
        checkpoints: if curve_path.is_some() {
            checkpoint_grid((net.time_window / 4).max(1), span)
        } else {
            Vec::new()
        },
    };
    let outcome = classify_batch(&net, &data, &schedule, coding, &opts)?;

    if let Some(path) = cfg.pick::<PathBuf>(a.trace.clone(), "trace")? {
        if coding != Coding::Ttfs {
            bail!("--trace needs ttfs coding");
        }
        let i = cfg.pick_or(a.trace_sample, "trace_sample", 0)?;
        if i >= data.len() {
            bail!("trace sample {i} out of range, dataset has {} samples", data.len());
        }
        let traced = run_ttfs_with(
            &net,
            data.sample(i),
            &schedule,
            &RunOptions {
                record_trace: true,
                ..opts.clone()
            },
        )?;
        write_trace_csv(&path, &traced.trace)?;
    }

    if let Some(path) = &curve_path {
        let mut s = String::from("time,accuracy\n");
        for (t, acc) in &outcome.curve {
            let _ = writeln!(s, "{t},{acc}");
        }
        write_file(path, &s)?;
    }

    let summary = SummaryOptions {
        count_input_spikes: !cfg.switch(a.exclude_input_spikes, "exclude_input_spikes")?,
    };
    let report = summarize(method, &outcome.runs, None, summary)?;
    print!("{}", format_table(std::slice::from_ref(&report)));
    println!(
        "max hidden spikes per inference {} of {} hidden neurons",
        outcome.max_hidden_spikes,
        net.hidden_neurons()
    );
    if let Some(path) = cfg.pick::<PathBuf>(a.report.clone(), "report")? {
        write_file(&path, &format!("{}\n", report.to_json_line()))?;
    }
    Ok(())
}
