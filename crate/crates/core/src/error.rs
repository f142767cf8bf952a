use std::path::PathBuf;

/// Errors produced by the simulator, the learners and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (unknown id, malformed action, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A layer produced NaN or infinity.
    #[error("non-finite value produced by layer `{layer}`")]
    NonFinite { layer: String },

    /// Training blew up; the message carries the last diagnostics.
    #[error("training diverged at episode {episode}: {detail}")]
    Diverged { episode: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            actual,
        }
    }
}
