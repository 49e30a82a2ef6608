use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({birth}, inf) has infinite death; cap or drop essential classes first")]
    UnboundedPoint { birth: f64 },

    #[error("dilation factor must be non-negative, got {0}")]
    InvalidDilation(f64),

    #[error("line {line}: death {death} is smaller than birth {birth}")]
    NegativePersistence { line: usize, birth: f64, death: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("the first diagram has zero persistence; no dilation can move it off the diagonal")]
    DegenerateA,

    #[error("number of partitions must be at least 1, got {0}")]
    InvalidPartitions(usize),

    #[error("{what} has size {size}, above the brute-force limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("distance matrix is not symmetric at ({i}, {j})")]
    AsymmetricMatrix { i: usize, j: usize },

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("filtration exceeds the simplex cap of {cap}")]
    TooManySimplices { cap: usize },

    #[error("point {index} has norm {norm} >= 1; the Poincare distance is defined on the open unit ball")]
    OutsideBall { index: usize, norm: f64 },

    #[error("point {index} is the zero vector; cosine dissimilarity is undefined")]
    ZeroVector { index: usize },

    #[error("points have inconsistent dimensions ({expected} vs {found} at row {index})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },

    #[error("no input diagrams")]
    EmptyInput,

    #[error("class '{label}' has {size} points, fewer than the subsample size {m}")]
    ClassTooSmall {
        label: String,
        size: usize,
        m: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
