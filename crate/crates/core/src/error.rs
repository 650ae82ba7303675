use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the kineme pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: {frames} frames, need at least {needed}")]
    SeriesTooShort { frames: usize, needed: usize },
    #[error("overlap fraction {0} outside [0, 1)")]
    InvalidOverlap(f64),
    #[error("segment length of {0} frames is below the 2-frame minimum")]
    SegmentTooShort(usize),
    #[error("segment matrices disagree on segment length or step")]
    MixedSegmentLength,
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("matrix has a negative entry at ({row}, {col})")]
    NegativeInput { row: usize, col: usize },
    #[error("rank {rank} exceeds min(rows, cols) = {max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("{points} points cannot support {k} mixture components")]
    TooFewPoints { points: usize, k: usize },
    #[error("mixture component {0} collapsed twice")]
    DegenerateComponent(usize),

    #[error("insufficient training data: {segments} segments, need {needed}")]
    InsufficientData { segments: usize, needed: usize },

    #[error("AU track too short: {frames} frames, need {needed}")]
    TrackTooShort { frames: usize, needed: usize },

    #[error("empty sequence corpus")]
    EmptyCorpus,
    #[error("symbol {symbol} outside [1, {k}]")]
    SymbolOutOfRange { symbol: usize, k: usize },
    #[error("loss {loss} does not match the {head} head")]
    LossHeadMismatch { loss: &'static str, head: &'static str },

    #[error("no scores supplied")]
    EmptyScores,
    #[error("too few videos: {got}, need {needed}")]
    TooFewVideos { got: usize, needed: usize },
    #[error("all features are constant; covariance is degenerate")]
    DegenerateCovariance,

    #[error("missing column(s): {}", .0.join(", "))]
    MissingColumn(Vec<String>),
    #[error("empty file: {0}")]
    EmptyFile(PathBuf),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("chunk of {chunk_frames} frames is shorter than the {window_frames}-frame window")]
    ChunkTooShort { chunk_frames: usize, window_frames: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateComponent(_)
            | Error::DegenerateCovariance
            | Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
