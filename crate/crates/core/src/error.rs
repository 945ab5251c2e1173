use thiserror::Error;

/// Errors raised while loading records and serving the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate entity id `{0}`")]
    DuplicateId(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("entity `{0}` has an empty name")]
    EmptyName(String),
    #[error("mention at line {0} has empty text")]
    EmptyMentionText(usize),
    #[error("both strings are empty")]
    BothEmpty,

    #[error("word vectors: bad header: {0}")]
    BadHeader(String),
    #[error("word vectors: line {line} has {found} values, expected {expected}")]
    DimMismatch { line: usize, expected: usize, found: usize },
    #[error("word vectors: duplicate token `{0}`")]
    DuplicateToken(String),
    #[error("word vectors: non-finite value at line {0}")]
    NonFiniteValue(usize),
    #[error("word vectors: header declares {declared} entries, found {found}")]
    CountMismatch { declared: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no forward pass recorded for backward")]
    GraphNotRecorded,
    #[error("update produced a non-finite parameter")]
    NonFiniteUpdate,

    #[error("cannot encode an empty word")]
    EmptyWord,
    #[error("cannot encode an empty name")]
    EmptySurface,
    #[error("no entity has a description yielding triplets")]
    NoEligibleEntities,
    #[error("no precomputed vector for key `{0}`")]
    MissingVector(String),
    #[error("weak labelling produced no positive pairs")]
    NoPositives,
    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("dataset too small to split: {0}")]
    TooSmall(String),
    #[error("empty input")]
    EmptyInput,
    #[error("need at least one positive and one negative")]
    SingleClass,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown entity id `{0}`")]
    UnknownEntity(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
