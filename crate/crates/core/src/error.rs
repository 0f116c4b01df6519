use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("anchor matrix is rank deficient (smallest singular value {smallest:.3e}, largest {largest:.3e})")]
    RankDeficientAnchors { smallest: f64, largest: f64 },

    #[error("connectivity unreachable at these parameters after {attempts} attempts")]
    ConnectivityUnreachable { attempts: usize },

    #[error("clique data is not an EDM: eigenvalue {eigenvalue:.3e} of the centered Gram matrix is negative")]
    NotEdm { eigenvalue: f64 },

    #[error("clique distances are not realizable in dimension {r}: face rank {rank} exceeds {max}, eigenvalue tail {tail:?}")]
    InconsistentClique {
        r: usize,
        rank: usize,
        max: usize,
        tail: Vec<f64>,
    },

    #[error("invalid clique: {0}")]
    InvalidClique(String),

    #[error("contradictory bounds: {0}")]
    ContradictoryBounds(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
