use thiserror::Error;

/// Library-wide error type.
///
/// Variants map onto the process exit codes used by the CLI:
/// usage/schema/domain problems exit with 2, numerical failures with 3,
/// singular (caustic) configurations with 4 and failed self-check
/// invariants with 5.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: out-of-domain time, malformed scenario, bad parameter.
    #[error("invalid input: {0}")]
    Usage(String),

    /// A numerical routine failed to reach the requested accuracy.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The requested evaluation sits on (or too close to) a singular
    /// configuration, e.g. a focal point where `s(t, t0) = 0`.  Callers that
    /// can handle the singular case should switch to the dedicated
    /// caustic-rule entry points.
    #[error("singular configuration at t = {t}: {msg}")]
    Singular { t: f64, msg: String },

    /// A self-check invariant (Wronskian, normalisation, determinant...)
    /// failed beyond tolerance.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Numeric(_) => 3,
            Error::Singular { .. } => 4,
            Error::Invariant(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
