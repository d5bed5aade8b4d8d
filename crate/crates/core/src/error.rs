use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Variants fall into two families that the command-line front end maps to
/// distinct exit codes: contract/precondition failures (bad input, wrong
/// shapes, stale caches) and numeric failures (eigensolver breakdown, invariant
/// residuals out of tolerance).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (residual {residual:.3e} > {tolerance:.3e})")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("trace is {trace} (expected 1 within {tolerance:.1e})")]
    InvalidTrace { trace: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("index {index} out of range for {len} eigenstates")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("energy shell is empty: {0}")]
    EmptyShell(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("energy {energy} outside the valid range [{lo}, {hi}]")]
    OutOfRange { energy: f64, lo: f64, hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate thermodynamic profile: {0}")]
    DegenerateProfile(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("stale cache at {path}: expected model hash {expected}, found {found}")]
    StaleCache {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("cache at {0} is locked by another writer")]
    CacheLocked(PathBuf),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::DegenerateProfile(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
