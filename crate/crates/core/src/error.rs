use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid IRI {0:?}")]
    InvalidIri(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("ontology: {0}")]
    Ontology(String),

    #[error("expected {expected} IRI, got {iri}")]
    WrongKind { iri: String, expected: &'static str },

    #[error("entity {0} is not in the graph")]
    UnknownEntity(String),

    #[error("no path between {0} and {1}")]
    NoPath(String, String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("missing value for template placeholder {{{0}}}")]
    MissingPlaceholder(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
