use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] qhmc_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A required input file is absent.
    #[error("{path}: not found; expected {expected}")]
    MissingInput { path: PathBuf, expected: &'static str },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for bad input values, 3 for file-system trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) if e.is_validation() => 2,
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}
