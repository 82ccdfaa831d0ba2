use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Every offending key or value, one message each.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error(transparent)]
    Core(#[from] lentropy::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Format { path: path.into(), message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(vec![message.into()])
    }

    /// Process exit status: 2 configuration, 3 divergence, 4 input/output,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Core(lentropy::Error::Divergence { .. } | lentropy::Error::NonFiniteActivation { .. }) => 3,
            Self::Core(lentropy::Error::InvalidArgument(_) | lentropy::Error::DimensionMismatch { .. }) => 2,
            Self::Io { .. } | Self::Format { .. } | Self::Consistency(_) => 4,
            Self::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
