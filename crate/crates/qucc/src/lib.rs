#![doc = include_str!("../README.md")]

pub mod driver;
pub mod fcidump;
pub mod info;
pub mod manifest;
pub mod scan;

use thiserror::Error;

/// Any failure surfaced by the command-line driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Read(#[from] fcidump::ReadError),
    #[error(transparent)]
    Manifest(#[from] manifest::ManifestError),
    #[error(transparent)]
    Solver(#[from] qucc_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Read(fcidump::ReadError::Io { .. }) | Error::Io(_) => "io",
            Error::Read(fcidump::ReadError::Parse { .. }) => "parse",
            Error::Manifest(_) => "manifest",
            Error::Solver(_) => "solver",
            Error::Csv(_) => "output",
            Error::Usage(_) => "usage",
        }
    }
}
