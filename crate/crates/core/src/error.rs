use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    /// The normal equations of the affine search became numerically singular.
    #[error("normal equations numerically singular at step {step}")]
    RankDeficient { step: usize },

    #[error("precondition violated: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dense assembly of an operator with n = {n} exceeds the limit {limit}; pass the override flag to force it")]
    SizeGate { n: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

impl Error {
    /// Process exit code for the command-line runner: 2 usage or
    /// configuration, 3 I/O, 4 malformed input or dimensions, 5 size gate,
    /// 6 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Io(_) => 3,
            Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::NotSquare { .. }
            | Error::InvalidPartition(_)
            | Error::Contract(_) => 4,
            Error::SizeGate { .. } => 5,
            Error::NotSymmetric { .. } | Error::RankDeficient { .. } => 6,
        }
    }
}
