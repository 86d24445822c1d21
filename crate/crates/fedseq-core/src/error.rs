//! Error type shared by the dataset, batching and federation layers.
//!
//! Shape-contract violations inside the numeric kernels (dimension
//! mismatches and the like) panic with the offending shapes in the
//! message instead; everything driven by external input returns `Err`.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// IDX stream began with the wrong magic number.
    IdxBadMagic { expected: u32, got: u32 },
    /// IDX stream ended before the advertised payload.
    IdxTruncated { needed: usize, available: usize },
    /// Image and label streams advertise different example counts.
    IdxCountMismatch { images: usize, labels: usize },
    /// Image stream carries non-square images.
    IdxNotSquare { rows: u32, cols: u32 },
    /// A label is outside the class range.
    InvalidLabel { label: usize, classes: usize },
    /// Partitioning or federation was asked for zero clients.
    NoClients,
    /// Fixed-length construction needs exactly one menu entry per client.
    MenuSizeMismatch { menu: usize, clients: usize },
    /// The size menu is empty.
    EmptyMenu,
    /// A client would end up with no examples.
    EmptyClient { client: usize },
    /// A length distribution whose probabilities do not sum to one.
    NotADistribution { sum: f64 },
    /// A batch plan was requested over an empty dataset.
    EmptyDataset,
    /// Aggregation was invoked with no client results.
    EmptyAggregation,
    /// Two parameter vectors of different lengths were combined.
    ParamLengthMismatch { left: usize, right: usize },
    /// Training produced a non-finite parameter; `client` is `None` when
    /// the aggregate itself went non-finite.
    NonFinite { round: usize, client: Option<usize> },
    /// Configuration rejected before any training started.
    InvalidConfig(String),
    /// A serialized parameter vector that cannot be decoded.
    BadParamEncoding(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IdxBadMagic { expected, got } => {
                write!(f, "bad magic: expected {expected:#010x}, got {got:#010x}")
            }
            Error::IdxTruncated { needed, available } => {
                write!(f, "truncated stream: needed {needed} bytes, had {available}")
            }
            Error::IdxCountMismatch { images, labels } => {
                write!(f, "count mismatch: {images} images vs {labels} labels")
            }
            Error::IdxNotSquare { rows, cols } => {
                write!(f, "non-square images: {rows}x{cols}")
            }
            Error::InvalidLabel { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::NoClients => write!(f, "client count must be at least 1"),
            Error::MenuSizeMismatch { menu, clients } => {
                write!(f, "size menu has {menu} entries but there are {clients} clients")
            }
            Error::EmptyMenu => write!(f, "size menu is empty"),
            Error::EmptyClient { client } => {
                write!(f, "client {client} would receive no examples")
            }
            Error::NotADistribution { sum } => {
                write!(f, "probabilities sum to {sum}, not 1")
            }
            Error::EmptyDataset => write!(f, "dataset is empty"),
            Error::EmptyAggregation => write!(f, "nothing to aggregate"),
            Error::ParamLengthMismatch { left, right } => {
                write!(f, "parameter length mismatch: {left} vs {right}")
            }
            Error::NonFinite { round, client: Some(c) } => {
                write!(f, "non-finite parameters from client {c} in round {round}")
            }
            Error::NonFinite { round, client: None } => {
                write!(f, "non-finite aggregated parameters in round {round}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::BadParamEncoding(msg) => write!(f, "bad parameter encoding: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
