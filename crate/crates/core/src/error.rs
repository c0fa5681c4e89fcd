use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unrecognized file magic in {0}")]
    BadMagic(PathBuf),

    #[error("unsupported NIfTI datatype code {0} (expected 2, 4 or 16)")]
    UnsupportedDtype(i16),

    #[error("unsupported raw dtype {0:?} (expected \"f32\" or \"u8\")")]
    UnsupportedRawDtype(String),

    #[error("truncated payload: header declares {declared} bytes, {available} available")]
    Truncated { declared: usize, available: usize },

    #[error("expected a 3D volume, header dim[0] = {0}")]
    NotThreeDimensional(i64),

    #[error("invalid dims {0:?}: every axis must be positive")]
    InvalidDims([usize; 3]),

    #[error("data length {len} does not match dims {dims:?}")]
    LengthMismatch { dims: [usize; 3], len: usize },

    #[error("non-finite value at voxel {0}")]
    NonFinite(usize),

    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("class count mismatch: {left} vs {right}")]
    ClassCountMismatch { left: usize, right: usize },

    #[error("non-integral label value {value} at voxel {index}")]
    NonIntegralLabel { index: usize, value: f64 },

    #[error("label {label} at voxel {index} is outside 0..{num_classes}")]
    LabelOutOfRange {
        index: usize,
        label: i64,
        num_classes: usize,
    },

    #[error("label {0} cannot be stored as u8 (limit 254)")]
    LabelOverflow(u32),

    #[error("degenerate volume: {0}")]
    DegenerateVolume(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("incomplete robustness matrix: {0}")]
    IncompleteMatrix(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failing
    /// pipeline stage.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Stage { .. } | Error::Io { .. })
    }
}
