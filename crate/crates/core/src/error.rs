use thiserror::Error;

use crate::qsr::BlockId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("contradictory atoms: left and right both hold for ({0}, {1})")]
    ContradictoryAtoms(BlockId, BlockId),
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("label `{0}` is not in the corpus index")]
    UnknownLabel(String),
    #[error("{0} has already been placed and may not be moved again")]
    SubjectAlreadyMoved(BlockId),
    #[error("{0} is not on the table")]
    TargetNotPlaced(BlockId),
    #[error("the top of {0} is covered")]
    TargetOccupied(BlockId),
    #[error("placement of {0} leaves the table")]
    OutOfBounds(BlockId),
    #[error("illegal placement of {block}: {reason}")]
    IllegalPlacement { block: BlockId, reason: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("a block cannot be related to itself ({0})")]
    SameBlock(BlockId),
    #[error("no legal move is available")]
    NoLegalMove,
    #[error("the example and holdout relation labels do not intersect")]
    EmptyIntersection,
    #[error("no options to choose from")]
    NoOptions,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("generation stuck at step {step}: {reason}")]
    GenerationStuck { step: usize, reason: String },
    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),
    #[error("model bundle does not match the corpus: {0}")]
    DataMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
