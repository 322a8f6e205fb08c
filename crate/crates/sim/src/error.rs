//! Error type for the simulation harness.

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    /// Invalid harness configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Error surfaced from the tuning library.
    #[error(transparent)]
    Tuner(#[from] mabtune::Error),
    /// Malformed metrics text.
    #[error("metrics parse error: {0}")]
    Parse(String),
    /// Filesystem failure while writing outputs.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
