use std::path::PathBuf;

/// Crate-wide error. Messages carry the module that raised them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("nlp: {0}")]
    Nlp(String),
    #[error("embeddings: {0}")]
    Embeddings(String),
    #[error("stats: {0}")]
    Stats(String),
    #[error("graphs: {0}")]
    Graphs(String),
    #[error("nn: {0}")]
    Nn(String),
    #[error("model: {0}")]
    Model(String),
    #[error("eval: {0}")]
    Eval(String),
    #[error("config: {0}")]
    Config(String),
    /// Inputs rejected before any work was done (exit code 1 in the CLI).
    #[error("validation: {0}")]
    Validation(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
