use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;

pub const HISTOGRAM_BINS: usize = 1024;

/// How the per-layer scale `lambda` is chosen from recorded activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    Max,
    /// Percentile (0, 100] of the positive activations, e.g. 99.9.
    Percentile(f64),
}

/// Distribution of the strictly positive values of one layer. Bins split
/// `(0, max]` evenly; exact extremes are kept beside the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueHistogram {
    pub max: f64,
    /// Smallest strictly positive value, `INFINITY` if none was seen.
    pub min_positive: f64,
    pub counts: Vec<u64>,
    /// Values that were zero or negative.
    pub non_positive: u64,
}

impl ValueHistogram {
    fn with_extremes(max: f64, min_positive: f64) -> Self {
        ValueHistogram {
            max,
            min_positive,
            counts: vec![0; HISTOGRAM_BINS],
            non_positive: 0,
        }
    }

    /// Histogram of an in-memory sample with `HISTOGRAM_BINS` bins.
    pub fn from_values(values: &[f64]) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let min_positive = values
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let mut h = ValueHistogram::with_extremes(max, min_positive);
        if max > 0.0 {
            values.iter().for_each(|&v| h.add(v));
        } else {
            h.non_positive = values.len() as u64;
        }
        h
    }

    pub fn positive(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        self.max / self.counts.len() as f64
    }

    #[inline]
    fn bin_of(&self, v: f64) -> usize {
        let b = (v / self.max * self.counts.len() as f64) as usize;
        b.min(self.counts.len() - 1)
    }

    fn add(&mut self, v: f64) {
        if v > 0.0 {
            let b = self.bin_of(v);
            self.counts[b] += 1;
        } else {
            self.non_positive += 1;
        }
    }

    fn merge(mut self, other: &ValueHistogram) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.non_positive += other.non_positive;
        self
    }

    pub fn midpoint(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width()
    }

    /// `(value, weight)` pairs for every occupied bin, values at bin midpoints.
    pub fn weighted_midpoints(&self) -> Vec<(f64, u64)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (self.midpoint(b), c))
            .collect()
    }

    /// Percentile of the positive values, interpolated linearly inside the bin.
    pub fn percentile(&self, p: f64) -> f64 {
        let total = self.positive();
        if total == 0 {
            return 0.0;
        }
        if p >= 100.0 {
            return self.max;
        }
        let target = p / 100.0 * total as f64;
        let mut cum = 0.0;
        for (b, &c) in self.counts.iter().enumerate() {
            let next = cum + c as f64;
            if next >= target && c > 0 {
                let frac = (target - cum) / c as f64;
                let lo = b as f64 * self.bin_width();
                return (lo + frac * self.bin_width()).clamp(self.min_positive, self.max);
            }
            cum = next;
        }
        self.max
    }

    /// The same distribution after dividing every value by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        ValueHistogram {
            max: self.max / scale,
            min_positive: self.min_positive / scale,
            counts: self.counts.clone(),
            non_positive: self.non_positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub lambda: f64,
    pub histogram: ValueHistogram,
}

/// Per-layer activation statistics of a network over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    pub normalization: Normalization,
    /// Input pixels, the values encoded with layer 0's kernel.
    pub input: ValueHistogram,
    /// One entry per weight layer: post-ReLU activations for hidden layers,
    /// logits for the last layer.
    pub layers: Vec<LayerStats>,
}

impl ActivationStats {
    pub fn lambdas(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.lambda).collect()
    }

    /// Distribution of the values that travel with layer `l`'s kernel: the
    /// input pixels for `l = 0`, otherwise the activations of layer `l - 1`.
    pub fn encoded_values(&self, l: usize) -> &ValueHistogram {
        if l == 0 {
            &self.input
        } else {
            &self.layers[l - 1].histogram
        }
    }

    pub fn with_normalization(&self, normalization: Normalization) -> Result<Self> {
        let mut out = self.clone();
        out.normalization = normalization;
        for (idx, l) in out.layers.iter_mut().enumerate() {
            l.lambda = lambda_for(&l.histogram, normalization, idx)?;
        }
        Ok(out)
    }

    /// Statistics of the network after dividing each layer by its lambda.
    pub fn rescaled(&self) -> Self {
        ActivationStats {
            normalization: self.normalization,
            input: self.input.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerStats {
                    lambda: 1.0,
                    histogram: l.histogram.scaled(l.lambda),
                })
                .collect(),
        }
    }
}

fn lambda_for(h: &ValueHistogram, normalization: Normalization, layer: usize) -> Result<f64> {
    if h.positive() == 0 {
        return Err(Error::DegenerateStats { layer });
    }
    let lambda = match normalization {
        Normalization::Max => h.max,
        Normalization::Percentile(p) if p > 0.0 && p <= 100.0 => h.percentile(p),
        Normalization::Percentile(p) => {
            return Err(Error::Config(format!("percentile {p} outside (0, 100]")));
        }
    };
    if lambda > 0.0 {
        Ok(lambda)
    } else {
        Err(Error::DegenerateStats { layer })
    }
}

#[derive(Clone)]
struct Extremes {
    max: Vec<f64>,
    min_pos: Vec<f64>,
}

impl Extremes {
    fn new(n: usize) -> Self {
        Extremes {
            max: vec![0.0; n],
            min_pos: vec![f64::INFINITY; n],
        }
    }

    fn observe(mut self, slot: usize, values: &[f64]) -> Self {
        for &v in values {
            if v > self.max[slot] {
                self.max[slot] = v;
            }
            if v > 0.0 && v < self.min_pos[slot] {
                self.min_pos[slot] = v;
            }
        }
        self
    }

    fn merge(mut self, o: Extremes) -> Self {
        for i in 0..self.max.len() {
            self.max[i] = self.max[i].max(o.max[i]);
            self.min_pos[i] = self.min_pos[i].min(o.min_pos[i]);
        }
        self
    }
}

/// Two passes over the data: exact extremes first, then histograms over
/// `(0, max]`. Slot 0 holds the input, slot `l + 1` weight layer `l`.
pub fn record_stats(net: &NetworkSpec, data: &Dataset, normalization: Normalization) -> Result<ActivationStats> {
    net.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != net.input_len() {
        return Err(Error::ShapeMismatch {
            expected: net.input_len(),
            actual: data.dim(),
        });
    }
    let slots = net.layers.len() + 1;

    let ext = (0..data.len())
        .into_par_iter()
        .fold(
            || Extremes::new(slots),
            |acc, i| {
                let x = data.sample(i);
                let acts = super::forward_unchecked(net, x);
                acts.iter()
                    .enumerate()
                    .fold(acc.observe(0, x), |a, (l, v)| a.observe(l + 1, v))
            },
        )
        .reduce(|| Extremes::new(slots), Extremes::merge);

    let blank: Vec<ValueHistogram> = (0..slots)
        .map(|s| ValueHistogram::with_extremes(ext.max[s], ext.min_pos[s]))
        .collect();
    let hists = (0..data.len())
        .into_par_iter()
        .fold(
            || blank.clone(),
            |mut acc, i| {
                let x = data.sample(i);
                if acc[0].max > 0.0 {
                    x.iter().for_each(|&v| acc[0].add(v));
                } else {
                    acc[0].non_positive += x.len() as u64;
                }
                for (l, v) in super::forward_unchecked(net, x).iter().enumerate() {
                    let h = &mut acc[l + 1];
                    if h.max > 0.0 {
                        v.iter().for_each(|&z| h.add(z));
                    } else {
                        h.non_positive += v.len() as u64;
                    }
                }
                acc
            },
        )
        .reduce(
            || blank.clone(),
            |a, b| a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect(),
        );

    let mut hists = hists.into_iter();
    let input = hists.next().unwrap();
    let layers = hists
        .enumerate()
        .map(|(l, histogram)| {
            Ok(LayerStats {
                lambda: lambda_for(&histogram, normalization, l)?,
                histogram,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivationStats {
        normalization,
        input,
        layers,
    })
}
