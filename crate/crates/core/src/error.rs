use thiserror::Error;

/// Library-wide error type.
///
/// The variants follow the failure taxonomy of the toolkit: `Validation` and
/// `Usage` mean the caller handed us something malformed, everything else is
/// a numerical failure carrying enough context to diagnose the run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Kernel matrix too ill-conditioned to trust the drift; carries the
    /// offending configuration.
    #[error("conditioning error: rcond estimate {rcond:.3e} below threshold at t={t}, n={},              x in [{:.4}, {:.4}], b in [{:.4}, {:.4}]",
            x.len(),
            x.first().copied().unwrap_or(f64::NAN),
            x.last().copied().unwrap_or(f64::NAN),
            b.first().copied().unwrap_or(f64::NAN),
            b.last().copied().unwrap_or(f64::NAN))]
    Conditioning {
        rcond: f64,
        t: f64,
        x: Vec<f64>,
        b: Vec<f64>,
    },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("solver error after {iterations} iterations: final mismatch {mismatch:.3e} (tol {tol:.3e})")]
    Solver {
        iterations: usize,
        mismatch: f64,
        tol: f64,
    },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// True for errors that indicate bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Usage(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
