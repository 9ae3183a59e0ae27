use alloc::string::String;

/// Errors raised by the tracking core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes, layouts or counts that have to agree do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A value lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An argument violates its precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A solver produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Point configuration does not determine the transform.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    /// Missing or invalid configuration (assets, feature sets).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;

impl Error {
    /// Prefixes the message, keeping the kind.
    pub fn context(self, prefix: &str) -> Self {
        use alloc::format;
        match self {
            Error::Dimension(m) => Error::Dimension(format!("{prefix}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{prefix}: {m}")),
            Error::Argument(m) => Error::Argument(format!("{prefix}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{prefix}: {m}")),
            Error::Degenerate(m) => Error::Degenerate(format!("{prefix}: {m}")),
            Error::Config(m) => Error::Config(format!("{prefix}: {m}")),
        }
    }
}
