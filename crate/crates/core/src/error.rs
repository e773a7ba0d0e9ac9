use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected configuration: a parameter, key or constraint is wrong.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A run or solve produced an invalid state (NaN, negative mass, band overflow).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("event cap of {0} proposals exceeded (runaway population?)")]
    EventCap(u64),

    #[error("check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfDomain { .. } => 2,
            Error::Numerical(_) | Error::EventCap(_) => 3,
            Error::Check(_) => 4,
            Error::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::Numerical(_) => "numerical",
            Error::EventCap(_) => "event_cap",
            Error::Check(_) => "check",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
