//! Labelled datasets: IDX files (MNIST) and seeded synthetic blobs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Row-major samples in `[0, 1]` with one class label each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Per-sample shape, e.g. `[1, 28, 28]`.
    pub sample_shape: Vec<usize>,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(sample_shape: Vec<usize>, features: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let dim: usize = sample_shape.iter().product();
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::ShapeMismatch {
                expected: dim * labels.len(),
                actual: features.len(),
            });
        }
        Ok(Dataset {
            sample_shape,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// First `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            sample_shape: self.sample_shape.clone(),
            features: self.features[..n * self.dim()].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        Dataset {
            sample_shape: self.sample_shape.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Reads an IDX image file and its label file; pixels are scaled to `[0, 1]`.
    pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
        let (shape, pixels) = read_idx_images(images.as_ref())?;
        let labels_v = read_idx_labels(labels.as_ref())?;
        let n = shape[0];
        if labels_v.len() != n {
            return Err(Error::format(
                labels.as_ref(),
                format!("{} labels for {} images", labels_v.len(), n),
            ));
        }
        let features = pixels.into_iter().map(|p| f64::from(p) / 255.0).collect();
        Dataset::new(vec![1, shape[1], shape[2]], features, labels_v)
    }

    /// MNIST split from a directory holding the four standard IDX files.
    pub fn load_mnist(dir: impl AsRef<Path>, train: bool) -> Result<Dataset> {
        let prefix = if train { "train" } else { "t10k" };
        let dir = dir.as_ref();
        Dataset::load_idx(
            dir.join(format!("{prefix}-images-idx3-ubyte")),
            dir.join(format!("{prefix}-labels-idx1-ubyte")),
        )
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

/// `([count, rows, cols], raw bytes)`.
pub fn read_idx_images(path: &Path) -> Result<([usize; 3], Vec<u8>)> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(path, format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(Error::format(
            path,
            format!("expected {} pixel bytes, found {}", n * rows * cols, body.len()),
        ));
    }
    Ok(([n, rows, cols], body.to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(path, format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(
            path,
            format!("expected {n} labels, found {}", body.len()),
        ));
    }
    Ok(body.to_vec())
}

pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [n, rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Default MNIST location: `$TTFS_MNIST_DIR`, else `data/mnist` under the
/// workspace root.
pub fn default_mnist_dir() -> PathBuf {
    std::env::var_os("TTFS_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

/// Gaussian blobs, one centre per class, clipped into `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct BlobConfig {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spread: f64,
    pub seed: u64,
}

pub fn make_blobs(cfg: BlobConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centres: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| (0..cfg.dim).map(|_| rng.random_range(0.15..0.85)).collect())
        .collect();
    let noise = Normal::new(0.0, cfg.spread).expect("spread must be finite and non-negative");
    let mut features = Vec::with_capacity(cfg.classes * cfg.per_class * cfg.dim);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.per_class);
    for i in 0..cfg.classes * cfg.per_class {
        let c = i % cfg.classes;
        for &m in &centres[c] {
            features.push((m + noise.sample(&mut rng)).clamp(0.0, 1.0));
        }
        labels.push(c as u8);
    }
    Dataset {
        sample_shape: vec![cfg.dim],
        features,
        labels,
    }
}
