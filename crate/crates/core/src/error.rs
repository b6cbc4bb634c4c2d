//! Error type shared across the crate.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// All failure modes surfaced by the library.
///
/// Configuration problems are rejected eagerly at construction time so that
/// anything holding a [`crate::config::PartitionConfig`] can assume its
/// invariants hold; runtime errors cover I/O, format, and data problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter failed validation; the message names the parameter and the
    /// violated constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The pool cannot satisfy the dedicated + shared quota demand.
    ///
    /// Raised at configuration time: `K_pool >= M * k_ded + k_shr` must hold
    /// before any lane runs, and quotas are never silently clamped.
    #[error(
        "infeasible partition: K_pool={k_pool} < M*k_ded + k_shr = {m}*{k_ded} + {k_shr} = {required}"
    )]
    InfeasiblePartition {
        k_pool: u32,
        m: u32,
        k_ded: u32,
        k_shr: u32,
        required: u32,
    },

    /// Candidate pool handed to the permutation contained a repeated id.
    #[error("duplicate document id {id} in candidate pool")]
    DuplicatePoolId { id: u64 },

    /// The candidate pool is smaller than a caller-requested slice of it.
    #[error("pool of {actual} candidates is smaller than required {required}")]
    PoolTooSmall { required: usize, actual: usize },

    /// A dataset or query matrix failed a structural check.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Per-query relevant set was empty; the query must be excluded from
    /// aggregate quality metrics rather than scored as zero.
    #[error("empty relevant set; query excluded from aggregates")]
    EmptyRelevantSet,

    /// An on-disk artifact did not match the expected format.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    /// Persisted index does not match the dataset or build it claims.
    #[error("index/artifact mismatch: {0}")]
    ArtifactMismatch(String),

    /// JSON (de)serialization failure, wrapped with no extra context loss.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// CSV write failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidParameter`] with formatted text.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Shorthand for [`Error::InvalidData`] with formatted text.
    pub fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}
