use thiserror::Error;

/// Failure classes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Parameters violate the standing assumptions (n > 2k, k >= 1, q > k, mu >= 2, ...).
    #[error("invalid parameters: {0}")]
    Parameter(String),

    /// The requested operation needs a regime the parameters are not in
    /// (for example a singular orbit below the Tso exponent).
    #[error("regime violation: {0}")]
    Regime(String),

    /// An argument lies outside the domain of a pointwise map.
    #[error("domain error: {0}")]
    Domain(String),

    /// The profile point cannot be mapped to the phase plane (w = 0 or w' = 0).
    #[error("transform domain error: {0}")]
    Transform(String),

    /// The adaptive integrator could not make progress.
    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A regular profile stopped being negative before the requested radius.
    #[error("solution reaches zero at r = {radius} before r_max")]
    ZeroCrossing { radius: f64 },

    /// The Picard oracle did not converge.
    #[error("oracle failure: {0}")]
    Oracle(String),

    /// The singular orbit could not be constructed.
    #[error("singular orbit construction failed: {0}")]
    Construction(String),

    /// Reading or writing serialized data failed.
    #[error("i/o error: {0}")]
    Io(String),

    /// A numerical consistency check that cannot fail under the preconditions did fail.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    /// `true` for the purely numerical failure classes.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::ZeroCrossing { .. }
                | Error::Oracle(_)
                | Error::Construction(_)
                | Error::Internal(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
