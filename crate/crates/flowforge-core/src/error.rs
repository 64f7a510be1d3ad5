use std::path::PathBuf;

/// Unified error type for the core library.
///
/// Every variant carries a stable machine-readable category (see
/// [`Error::category`]) so front ends can map failures to exit codes
/// without string-matching messages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Io(#[from] std::io::Error),

    /// Malformed input bytes: bad magic numbers, broken CSV/XML, invalid
    /// field encodings.
    #[error("{0}")]
    Parse(String),

    /// Input is well-formed but violates a documented rule (window with
    /// start after stop, duplicate manifest dates, all-absent filters, ...).
    #[error("{0}")]
    Validation(String),

    /// Cross-input disagreement: label conflicts between annotation
    /// sources, unknown anomaly ids during label propagation.
    #[error("{0}")]
    Consistency(String),

    /// Column sets or types do not line up between tables/params.
    #[error("{0}")]
    Schema(String),

    /// Mathematically undefined request (Simpson index of an empty set,
    /// sampling more rows than exist).
    #[error("{0}")]
    Domain(String),

    /// Caller broke an API precondition, e.g. writing a record that has no
    /// raw frame bytes.
    #[error("{0}")]
    Contract(String),

    /// Capture ended mid-packet; `yielded` complete packets were produced
    /// before the cut.
    #[error("truncated packet data in {path}: {yielded} complete packets read before cut")]
    TruncatedCapture { path: PathBuf, yielded: u64 },
}

impl Error {
    /// Stable category token, used by the CLI for exit-code mapping and
    /// printed as `error category=<token>: ...`.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
            Error::Validation(_) => "validation",
            Error::Consistency(_) => "consistency",
            Error::Schema(_) => "schema",
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::TruncatedCapture { .. } => "truncated",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
