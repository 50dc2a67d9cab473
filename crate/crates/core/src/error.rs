use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("reward matrix is empty")]
    EmptyMatrix,

    #[error("reward matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("reward at ({row}, {col}) is not finite: {value}")]
    NonFiniteReward { row: usize, col: usize, value: f64 },

    #[error("reward at ({row}, {col}) is negative: {value}")]
    NegativeReward { row: usize, col: usize, value: f64 },

    #[error("rescaling factor must be finite and positive, got {0}")]
    InvalidScale(f64),

    #[error("brute-force enumeration refused for order {n} (limit {limit})")]
    BruteForceTooLarge { n: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("MS shadowing correlation matrix is not positive semidefinite (pivot {pivot:e} at row {row})")]
    NotPositiveSemidefinite { row: usize, pivot: f64 },

    #[error("neighbor set needs at least {pilots} users, network has {users}")]
    TooFewUsers { users: usize, pilots: usize },

    #[error("pilot index {pilot} of user {user} is outside 0..{pilots}")]
    PilotOutOfRange {
        user: usize,
        pilot: usize,
        pilots: usize,
    },

    #[error("negative term in {0} rate expression")]
    NegativeTerm(&'static str),

    #[error("empty sample")]
    EmptySample,

    #[error("percentile fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
