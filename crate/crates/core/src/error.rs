use num_bigint::BigUint;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two shapes that must agree do not.
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A network, plan, block, or experiment description is inconsistent.
    #[error("configuration error{}: {message}", field.as_ref().map(|f| format!(" in `{f}`")).unwrap_or_default())]
    Config { field: Option<String>, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("format error: {0}")]
    Format(String),

    /// Text input rejected at a 1-based position.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("model space too large: {count} assignments exceed the limit of {limit}")]
    SpaceTooLarge { count: BigUint, limit: usize },

    #[error("training diverged{} at epoch {epoch}, batch {batch} (loss = {loss})", fold.map(|f| format!(" in fold {f}")).unwrap_or_default())]
    Divergence {
        fold: Option<usize>,
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: impl std::fmt::Debug, right: impl std::fmt::Debug) -> Self {
        Error::Dimension {
            op,
            left: format!("{left:?}"),
            right: format!("{right:?}"),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            field: None,
            message: message.into(),
        }
    }

    pub(crate) fn config_field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse { .. } | Error::InvalidArgument(_) | Error::SpaceTooLarge { .. } => 2,
            Error::Data(_) | Error::Format(_) | Error::Io(_) => 3,
            Error::Dimension { .. } | Error::Divergence { .. } | Error::Internal(_) => 4,
        }
    }
}
