use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which side of the image a region overflowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Edge::Top => "top",
            Edge::Bottom => "bottom",
            Edge::Left => "left",
            Edge::Right => "right",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("region exceeds the {0} edge of the image")]
    RegionOutOfBounds(Edge),

    #[error("empty region")]
    EmptyRegion,

    #[error("constant image: {0}")]
    ConstantImage(&'static str),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: expected a single-channel 8-bit image, found {found}")]
    MultiChannel { path: PathBuf, found: String },

    #[error("{path}: image is {width}x{height}, only square images are accepted")]
    NonSquare {
        path: PathBuf,
        width: u32,
        height: u32,
    },

    #[error("{path}: metadata field `{field}` is missing")]
    MissingMetadata { path: PathBuf, field: &'static str },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("checkpoint: bad magic {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("checkpoint: unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("checkpoint: truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checkpoint: CRC mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

/// Non-fatal conditions reported alongside a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Min-max normalization of an image whose pixels are all equal.
    ConstantImage,
    /// Connectivity requested for an image whose skeleton is empty.
    EmptySkeleton,
    /// A filter produced a flat response that could not be renormalized.
    FlatResponse(&'static str),
    /// Noise parameters outside the sweep ranges.
    NoiseParamsOutOfRange { mu: f64, sigma: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ConstantImage => write!(f, "constant image normalized to zeros"),
            Warning::EmptySkeleton => write!(f, "empty skeleton, connectivity reported as 0"),
            Warning::FlatResponse(filter) => write!(f, "{filter} response is flat"),
            Warning::NoiseParamsOutOfRange { mu, sigma } => {
                write!(f, "noise parameters mu={mu} sigma={sigma} outside the sweep range")
            }
        }
    }
}

/// A value plus an optional warning raised while computing it.
#[derive(Debug, Clone)]
#[must_use]
pub struct Flagged<T> {
    pub value: T,
    pub warning: Option<Warning>,
}

impl<T> Flagged<T> {
    pub fn ok(value: T) -> Self {
        Flagged {
            value,
            warning: None,
        }
    }

    pub fn warn(value: T, warning: Warning) -> Self {
        Flagged {
            value,
            warning: Some(warning),
        }
    }

    /// Drops the warning after logging it.
    pub fn logged(self) -> T {
        if let Some(w) = &self.warning {
            log::warn!("{w}");
        }
        self.value
    }
}
