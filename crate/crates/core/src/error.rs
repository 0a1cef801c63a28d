use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("lex error at line {line}, column {column}: {message}")]
    Lex {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("fixation csv row {row}: {message}")]
    FixationRow { row: usize, message: String },

    #[error("duplicate snippet id `{0}`")]
    DuplicateSnippet(String),

    #[error("unknown snippet id `{0}`")]
    UnknownSnippet(String),

    #[error("invalid token index {index} for snippet `{snippet}` with {len} tokens")]
    InvalidTokenIndex { snippet: String, index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric divergence: {0}")]
    Divergence(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numeric divergence rather than bad data.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
