//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by image construction, resampling, fusion, metrics and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes of two rasters (or a raster and a declared geometry) disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value is outside its admissible domain (non-finite sample,
    /// ratio < 2, gain outside (0,1), even kernel length, ...).
    #[error("invalid value: {0}")]
    Domain(String),

    /// An input is degenerate for the requested operation (flat intensity,
    /// zero-variance panchromatic, zero-mean reference band, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A method or option name is not known to the registry.
    #[error("unknown name: {0}")]
    Unknown(String),

    /// A configuration file or header is malformed or inconsistent.
    #[error("bad configuration: {0}")]
    Config(String),

    /// Underlying file-system error.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
