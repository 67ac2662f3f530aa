use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty knowledge graph")]
    EmptyGraph,

    #[error("triple {0} has no label")]
    MissingLabel(usize),

    #[error("population exhausted: requested {requested} triples but only {remaining} remain")]
    PopulationExhausted { requested: usize, remaining: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("variance undefined for {0} cluster group(s); at least 2 are required")]
    TooFewClusters(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("annotation channel closed after {labelled} of {requested} triples")]
    ChannelClosed { labelled: usize, requested: usize },

    #[error("annotator returned {got} labels for {expected} triples")]
    LabelCount { expected: usize, got: usize },

    #[error("degenerate t-test: {0}")]
    Degenerate(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
