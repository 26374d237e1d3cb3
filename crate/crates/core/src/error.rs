use alloc::string::String;

/// Error classes shared across the adapter. Every rejected input or failed
/// computation maps to exactly one variant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Lengths, shapes or index ranges that do not fit together.
    #[error("geometry: {0}")]
    Geometry(String),
    /// Non-finite or otherwise unusable input values.
    #[error("data: {0}")]
    Data(String),
    /// Invalid configuration (odd encoding size, lag count too large, ...).
    #[error("config: {0}")]
    Config(String),
    /// A factorization or iteration produced non-finite values.
    #[error("numerical: {0}")]
    Numerical(String),
    /// The input is valid but carries no information (zero variance, empty
    /// support after filtering).
    #[error("degenerate: {0}")]
    Degenerate(String),
    /// The base forecaster failed or broke its reply contract.
    #[error("oracle: {0}")]
    Oracle(String),
}

impl Error {
    /// Short stable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Numerical(_) => "numerical",
            Error::Degenerate(_) => "degenerate",
            Error::Oracle(_) => "oracle",
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
