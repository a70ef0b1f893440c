use thiserror::Error;

/// Errors produced by every stage of the pipeline.
///
/// Each variant maps onto a stable category string (see [`Error::category`])
/// that the command line tool prints so callers can branch on the failure
/// kind without parsing prose.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("version error: {0}")]
    Version(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Format(_) => "format",
            Error::Length(_) => "length",
            Error::Label(_) => "label",
            Error::Argument(_) => "argument",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Version(_) => "version",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
