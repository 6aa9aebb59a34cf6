use thiserror::Error;

/// Errors raised across the library. Each variant maps to a CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("level index {k} outside the chain index set {lo}..={hi}")]
    Index { k: usize, lo: usize, hi: usize },
    #[error("invalid lattice parameters: {0}")]
    Lattice(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("tabulated filter queried off its grid; interpolation is unsupported")]
    InterpolationUnsupported,
    #[error("precondition failed ({condition}): {detail}")]
    Precondition { condition: String, detail: String },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn precondition(condition: &str, detail: impl Into<String>) -> Self {
        Error::Precondition { condition: condition.to_string(), detail: detail.into() }
    }

    /// Exit code used by the CLI and the FFI status mapping.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) | Error::Lattice(_) => 2,
            _ => 3,
        }
    }
}
