use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid corpus: {0}")]
    Validation(String),

    #[error("{op}: incompatible shapes {shapes}")]
    Shape { op: &'static str, shapes: String },

    #[error("{0}")]
    Numeric(String),

    #[error("embeddings: {0}")]
    Embedding(String),

    #[error("model: {0}")]
    Model(String),

    #[error("training: {0}")]
    Training(String),

    #[error("scorer: {0}")]
    Score(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, shapes: impl Into<String>) -> Self {
        Error::Shape {
            op,
            shapes: shapes.into(),
        }
    }
}
