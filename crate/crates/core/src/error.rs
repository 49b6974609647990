use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("n = {n} exceeds the enumeration cap of {cap}; use a Monte-Carlo scan instead")]
    CapExceeded { n: usize, cap: usize },
    #[error("draw cap of {cap} exhausted after {accepted} accepted edges ({context})")]
    DrawCap {
        cap: u64,
        accepted: usize,
        context: &'static str,
    },
    #[error("malformed input at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        LabError::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::CapExceeded { .. } => 3,
            LabError::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
