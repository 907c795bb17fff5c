use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension guard exceeded: k = {k} (maximum {max})")]
    DimensionGuard { k: u32, max: u32 },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not skew-symmetric: entry ({i}, {j})")]
    NotSkew { i: usize, j: usize },

    #[error("matrix is not a rotation: |QQ^t - I|_max = {orthogonality:.3e}, |det - 1| = {det:.3e}")]
    NotRotation { orthogonality: f64, det: f64 },

    #[error("skew family generator does not square to -I (deviation {0:.3e})")]
    NotComplexStructure(f64),

    #[error("principal logarithm undefined: eigenvalue within {distance:.3e} of -1")]
    LogBranch { distance: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported modulation order {0} (expected 4, 16, 64, 256 or 1024)")]
    UnsupportedOrder(usize),

    #[error("constellation carries no bit labels")]
    MissingLabels,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True when the error stems from bad input data rather than a numerical
    /// failure. Used by the CLI to pick an exit code.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConstellation(_)
                | Error::InvalidParameter(_)
                | Error::UnsupportedOrder(_)
                | Error::MissingLabels
                | Error::Io { .. }
                | Error::Parse(_)
                | Error::DimensionMismatch { .. }
                | Error::NotSquare { .. }
                | Error::NotSkew { .. }
                | Error::NotRotation { .. }
                | Error::NotPowerOfTwo(_)
                | Error::DimensionGuard { .. }
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
