use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("pixel index {index} out of range for a grid of {n} pixels")]
    PixelOutOfRange { index: usize, n: usize },

    #[error("pixel {pixel}: depth {depth_m} m maps to time-bin {bin}, outside 0..{bins}")]
    DepthOutOfRange {
        pixel: usize,
        depth_m: f64,
        bin: i64,
        bins: usize,
    },

    #[error("solver produced a non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("time-slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error originates in an iterative solve rather than
    /// in input validation or I/O.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NonFinite { .. } => true,
            Error::Slice { source, .. } | Error::Stage { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Csv(_) | Error::Image(_) => true,
            Error::Slice { source, .. } | Error::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
