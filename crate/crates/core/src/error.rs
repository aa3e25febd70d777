use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("record {index} violates schema: {reason}")]
    SchemaViolation { index: u64, reason: String },
    #[error("malformed manifest at line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("malformed ledger at line {line}: {message}")]
    LedgerParse { line: usize, message: String },
    #[error("unknown block id {0}")]
    UnknownBlock(u32),
    #[error("block {block_id} is corrupt: {reason}")]
    CorruptBlock { block_id: u32, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("inconsistent parameters: {0}")]
    InvalidParams(String),
    #[error("requested {requested} blocks but only {remaining} remain unconsumed")]
    InsufficientBlocks { requested: usize, remaining: usize },
    #[error("ledger belongs to manifest {expected}, not {found}")]
    LedgerMismatch { expected: String, found: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pooled covariance matrix is singular")]
    SingularCovariance,
    #[error("category {0} is not declared in the schema")]
    UndeclaredCategory(u32),
    #[error("dataset has no label")]
    Unlabeled,
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
