use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The argument lies on the closed negative real axis, where principal
    /// powers, logarithms and roots are discontinuous.
    #[error("branch cut: lambda = {re} + {im}i lies on (-inf, 0]")]
    BranchCut { re: f64, im: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("laplace inversion unstable: {0}")]
    Inversion(String),

    #[error("kernel outside C1/C2/C3: {0}")]
    Unclassifiable(String),

    #[error("no sampler available for {0}")]
    SamplerUnavailable(String),

    #[error("horizon exhausted: {censored} of {total} paths did not pass the level before s = {horizon}")]
    Horizon {
        censored: usize,
        total: usize,
        horizon: f64,
    },

    #[error("tail truncation not certified: {0}")]
    Truncation(String),

    #[error("not covered by the decay-law table: {0}")]
    NotInTable(String),

    #[error("spatial resolution: {0}")]
    Resolution(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
