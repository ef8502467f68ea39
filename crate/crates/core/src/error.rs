use std::path::PathBuf;

use crate::network::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),

    #[error("degenerate stats: layer {layer} has no positive activation")]
    DegenerateStats { layer: usize },

    #[error("invalid normalization scale {value} for layer {layer}")]
    InvalidScale { layer: usize, value: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no encodable values in the given set")]
    EmptyEncodableSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("kernel optimization diverged in layer {layer} at iteration {iteration} (loss {loss})")]
    Divergence { layer: usize, iteration: usize, loss: f64 },

    #[error("schedule has {schedule} layers but network has {network}")]
    ScheduleMismatch { schedule: usize, network: usize },

    #[error("early firing needs an even time window, got {0}")]
    OddTimeWindow(u32),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by bad user input (missing files, malformed
    /// configs or data) as opposed to broken internal invariants.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::NonFiniteLoss { .. } | Error::Divergence { .. })
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
