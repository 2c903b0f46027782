use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum BwkError {
    #[error("empty collection")]
    EmptyCollection,
    #[error("invalid weight: {0}")]
    InvalidWeight(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid outcome: {0}")]
    InvalidOutcome(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),
    #[error("arm {arm} out of range for K = {k}")]
    ArmOutOfRange { arm: usize, k: usize },
    #[error("round {t} out of range (horizon {horizon})")]
    RoundOutOfRange { t: usize, horizon: usize },
    #[error("episode over")]
    EpisodeOver,
    #[error("impossible selection: arm {0} had probability 0")]
    ImpossibleSelection(usize),
    #[error("budget too small for lower-bound construction (epsilon = {0})")]
    BudgetTooSmallForLowerBound(f64),
    #[error("budget cannot cover initialization sweep (B = {budget}, K*c_max = {needed})")]
    BudgetBelowInitSweep { budget: f64, needed: f64 },
    #[error("horizon too short: arm {arm} still has budget {remaining} after {rounds} rounds")]
    HorizonTooShort {
        arm: usize,
        rounds: usize,
        remaining: f64,
    },
    #[error("instance too big for oracle ({states} states)")]
    OracleTooBig { states: u128 },
    #[error("empty trace")]
    EmptyTrace,
    #[error("mixed regret modes in aggregation")]
    MixedModes,
    #[error("not enough points for slope fit: {0} usable, need at least 3")]
    NotEnoughPoints(usize),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("episode failed (B = {budget}, replication {replication}, seed {seed:#018x}): {source}")]
    Episode {
        budget: f64,
        replication: usize,
        seed: u64,
        #[source]
        source: Box<BwkError>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = BwkError> = std::result::Result<T, E>;

impl BwkError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BwkError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        BwkError::InvalidParameter(msg.into())
    }
}
