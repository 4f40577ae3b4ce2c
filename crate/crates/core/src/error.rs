use thiserror::Error;

/// Errors raised across the crate.
///
/// Each variant maps onto one CLI exit code (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent problem description.
    #[error("configuration error: {0}")]
    Config(String),

    /// Transition graph is not strongly connected.
    #[error("not transitive: symbol {from} cannot reach symbol {to}")]
    NotTransitive { from: usize, to: usize },

    /// A parameter lies outside the certified domain of a quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine failed to converge or a certificate could not be produced.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A cross-check failed.
    #[error("validation failure: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::NotTransitive { .. } | Error::Io(_) => 2,
            Error::Domain(_) => 3,
            Error::Numeric(_) => 4,
            Error::Validation(_) => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
