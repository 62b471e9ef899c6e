use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("street too short: {0}")]
    StreetTooShort(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("cannot read config {path}: {source}")]
    ConfigMissing {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("unknown config key \"{key}\" in [{section}]")]
    UnknownKey { section: String, key: String },

    #[error("failed to write {path}: {source}")]
    Output {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
