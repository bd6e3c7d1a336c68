use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{node}` references unknown parent `{parent}`")]
    UnknownParent { node: String, parent: String },
    #[error("multiple roots: `{0}` and `{1}`")]
    MultipleRoots(String, String),
    #[error("cycle detected through node `{0}`")]
    CycleDetected(String),
    #[error("tree has no nodes")]
    EmptyTree,
    #[error("node `{0}` is not a leaf")]
    NotALeaf(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown leaf `{0}`")]
    UnknownLeaf(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("malformed polygon for leaf `{leaf}`: {reason}")]
    MalformedPolygon { leaf: String, reason: String },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("count matrix is empty")]
    EmptyCounts,
    #[error("leaf set mismatch: {0}")]
    LeafSetMismatch(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("non-finite likelihood at iteration {0}")]
    NonFiniteLikelihood(usize),
    #[error("empty leaf set")]
    EmptyLeafSet,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid holdout fraction {0}; must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error("test set would be empty")]
    EmptyTestSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name for this error, used by the CLI's
    /// structured stderr output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateId(_) => "DuplicateId",
            Error::UnknownParent { .. } => "UnknownParent",
            Error::MultipleRoots(..) => "MultipleRoots",
            Error::CycleDetected(_) => "CycleDetected",
            Error::EmptyTree => "EmptyTree",
            Error::NotALeaf(_) => "NotALeaf",
            Error::UnknownNode(_) => "UnknownNode",
            Error::UnknownLeaf(_) => "UnknownLeaf",
            Error::UnknownTag(_) => "UnknownTag",
            Error::MalformedPolygon { .. } => "MalformedPolygon",
            Error::MalformedRecord(_) => "MalformedRecord",
            Error::MalformedInput(_) => "MalformedInput",
            Error::EmptyCounts => "EmptyCounts",
            Error::LeafSetMismatch(_) => "LeafSetMismatch",
            Error::VocabularyMismatch(_) => "VocabularyMismatch",
            Error::NonFiniteLikelihood(_) => "NonFiniteLikelihood",
            Error::EmptyLeafSet => "EmptyLeafSet",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidFraction(_) => "InvalidFraction",
            Error::EmptyTestSet => "EmptyTestSet",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// True when the error signals a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteLikelihood(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
