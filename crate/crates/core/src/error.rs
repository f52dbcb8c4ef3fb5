use std::path::PathBuf;

/// Errors raised across the library.
///
/// Blowup of a run is *not* an error: it is recorded on the state and in the
/// diagnostics so that studies can observe it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("mobility domain error: {0}")]
    Domain(String),

    #[error("under-resolved kernel: {0}")]
    Resolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("test function touches the periodic boundary: {0}")]
    WrapContamination(String),

    #[error("run blew up at t = {time} (linf = {linf})")]
    Blowup { time: f64, linf: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
