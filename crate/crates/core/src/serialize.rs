//! Binary model container: a network plus, optionally, the activation
//! statistics it was converted or optimized with.
//!
//! All integers and floats are little-endian; floats are stored bit-exact.
//!
//! ```text
//! magic        8 bytes  "TTFSNET\0"
//! version      u32      1
//! time_window  u32
//! theta0       f64
//! num_layers   u32
//! per layer:
//!   kind       u8       0 = dense, 1 = conv2d
//!   in_shape   u8 rank, then rank x u32
//!   out_shape  u8 rank, then rank x u32
//!   conv only: in_channels, out_channels, kernel_size, stride, padding (u32 each)
//!   tau, t_d   f64, f64
//!   weights    u64 count, then count x f64
//!   bias       u64 count, then count x f64
//! has_stats    u8       0 or 1
//! stats:
//!   normalization  u8 (0 = max, 1 = percentile followed by f64 p)
//!   input histogram
//!   num_layers u32, then per layer: lambda f64, histogram
//! histogram:
//!   max f64, min_positive f64, bins u32, bins x u64 counts, non_positive u64
//! ```

use std::path::Path;

use crate::dnn::{ActivationStats, LayerStats, Normalization, ValueHistogram};
use crate::error::{Error, Result};
use crate::layer::{ConvGeometry, LayerKind, LayerSpec};
use crate::network::{KernelParams, NetworkSpec};

pub const MAGIC: &[u8; 8] = b"TTFSNET\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: NetworkSpec,
    pub stats: Option<ActivationStats>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("dimension fits in u32"));
    }
    fn shape(&mut self, s: &[usize]) {
        self.u8(u8::try_from(s.len()).expect("rank fits in u8"));
        s.iter().for_each(|&d| self.len(d));
    }
    fn floats(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
    fn histogram(&mut self, h: &ValueHistogram) {
        self.f64(h.max);
        self.f64(h.min_positive);
        self.len(h.counts.len());
        h.counts.iter().for_each(|&c| self.u64(c));
        self.u64(h.non_positive);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

type Parse<T> = std::result::Result<T, String>;

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Parse<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Parse<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Parse<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Parse<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Parse<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Parse<usize> {
        Ok(self.u32()? as usize)
    }
    /// Element count of a following array of `width`-byte items, checked
    /// against the bytes left so a corrupt count cannot trigger a huge allocation.
    fn count(&mut self, n: u64, width: usize) -> Parse<usize> {
        let left = (self.buf.len() - self.pos) / width;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= left)
            .ok_or_else(|| format!("array of {n} items overruns the file at byte {}", self.pos))
    }
    fn shape(&mut self) -> Parse<Vec<usize>> {
        let rank = self.u8()?;
        (0..rank).map(|_| self.len()).collect()
    }
    fn floats(&mut self) -> Parse<Vec<f64>> {
        let n = self.u64()?;
        let n = self.count(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn histogram(&mut self) -> Parse<ValueHistogram> {
        let max = self.f64()?;
        let min_positive = self.f64()?;
        let bins = u64::from(self.u32()?);
        let bins = self.count(bins, 8)?;
        let counts = (0..bins).map(|_| self.u64()).collect::<Parse<_>>()?;
        Ok(ValueHistogram {
            max,
            min_positive,
            counts,
            non_positive: self.u64()?,
        })
    }
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    let net = &model.net;
    w.u32(net.time_window);
    w.f64(net.theta0);
    w.len(net.layers.len());
    for l in &net.layers {
        w.u8(match l.kind {
            LayerKind::Dense => 0,
            LayerKind::Conv2d(_) => 1,
        });
        w.shape(&l.in_shape);
        w.shape(&l.out_shape);
        if let LayerKind::Conv2d(g) = l.kind {
            for v in [g.in_channels, g.out_channels, g.kernel_size, g.stride, g.padding] {
                w.len(v);
            }
        }
        w.f64(l.kernel.tau);
        w.f64(l.kernel.t_d);
        w.floats(&l.weights);
        w.floats(&l.bias);
    }
    match &model.stats {
        None => w.u8(0),
        Some(s) => {
            w.u8(1);
            match s.normalization {
                Normalization::Max => w.u8(0),
                Normalization::Percentile(p) => {
                    w.u8(1);
                    w.f64(p);
                }
            }
            w.histogram(&s.input);
            w.len(s.layers.len());
            for l in &s.layers {
                w.f64(l.lambda);
                w.histogram(&l.histogram);
            }
        }
    }
    w.0
}

pub fn decode_model(bytes: &[u8]) -> Parse<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err("not a model file (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let time_window = r.u32()?;
    let theta0 = r.f64()?;
    let num_layers = r.len()?;
    let mut layers = Vec::new();
    for idx in 0..num_layers {
        let kind = r.u8()?;
        let in_shape = r.shape()?;
        let out_shape = r.shape()?;
        let kind = match kind {
            0 => LayerKind::Dense,
            1 => LayerKind::Conv2d(ConvGeometry {
                in_channels: r.len()?,
                out_channels: r.len()?,
                kernel_size: r.len()?,
                stride: r.len()?,
                padding: r.len()?,
            }),
            other => return Err(format!("layer {idx}: unknown kind tag {other}")),
        };
        let kernel = KernelParams::new(r.f64()?, r.f64()?);
        let weights = r.floats()?;
        let bias = r.floats()?;
        layers.push(LayerSpec {
            kind,
            weights,
            bias,
            in_shape,
            out_shape,
            kernel,
        });
    }
    let stats = match r.u8()? {
        0 => None,
        1 => {
            let normalization = match r.u8()? {
                0 => Normalization::Max,
                1 => Normalization::Percentile(r.f64()?),
                other => return Err(format!("unknown normalization tag {other}")),
            };
            let input = r.histogram()?;
            let n = r.len()?;
            let layers = (0..n)
                .map(|_| {
                    Ok(LayerStats {
                        lambda: r.f64()?,
                        histogram: r.histogram()?,
                    })
                })
                .collect::<Parse<_>>()?;
            Some(ActivationStats {
                normalization,
                input,
                layers,
            })
        }
        other => return Err(format!("bad stats flag {other}")),
    };
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(Model {
        net: NetworkSpec {
            layers,
            time_window,
            theta0,
        },
        stats,
    })
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

/// Reads a model and checks that its network is structurally valid.
pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let model = decode_model(&bytes).map_err(|reason| Error::format(path, reason))?;
    model.net.validate()?;
    Ok(model)
}
