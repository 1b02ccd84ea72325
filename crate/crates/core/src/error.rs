use thiserror::Error;

/// Errors produced anywhere in the embedding engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid gaussian: {0}")]
    InvalidGaussian(String),

    #[error("natural parameters do not describe a distribution (theta2 = {theta2})")]
    DegenerateNaturalParams { theta2: f64 },

    #[error("cannot fuse an empty set of distributions")]
    EmptyFusionSet,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown tag id {0}")]
    UnknownTag(usize),

    #[error("unknown tag '{0}'")]
    UnknownTagName(String),

    #[error("unknown item id '{0}'")]
    UnknownId(String),

    #[error("tag set is empty")]
    EmptyTagSet,

    #[error("tag {0} appears more than once in the tag set")]
    DuplicateTag(usize),

    #[error("batch needs at least 2 items, got {0}")]
    BatchTooSmall(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("item '{0}' has no tags")]
    ItemWithoutTags(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid query: {field}: {message}")]
    InvalidQuery { field: String, message: String },

    #[error("subset is empty")]
    EmptySubset,

    #[error("need at least {needed} tags, got {got}")]
    TooFewTags { needed: usize, got: usize },

    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },

    #[error("line {line}: parse error: {message}")]
    ParseError { line: usize, message: String },

    #[error("line {line}: expected {expected} features, got {actual}")]
    InconsistentFeatureLength { line: usize, expected: usize, actual: usize },

    #[error("duplicate item id '{0}'")]
    DuplicateId(String),

    #[error("line {0}: tags list is empty")]
    EmptyTagsList(usize),

    #[error("unsupported model format version {0}")]
    VersionMismatch(u32),

    #[error("model file is truncated")]
    TruncatedFile,

    #[error("model header is corrupt: {0}")]
    HeaderCorrupt(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
