use thiserror::Error;

pub type Result<T> = std::result::Result<T, SsaError>;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, Error)]
pub enum SsaError {
    #[error("requested dimension {requested} exceeds the maximum {max} supported by the data")]
    DimensionTooLarge { requested: usize, max: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("seed id `{0}` not found in target domain")]
    UnknownSeedId(String),
    #[error("too few samples: {have} rows for {need} clusters")]
    TooFewSamples { have: usize, need: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("source class `{0}` has no seed in the target domain")]
    MissingSeedClass(String),
    #[error("frame mismatch: left has {left} columns, right has {right}")]
    FrameMismatch { left: usize, right: usize },
    #[error("need at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("class `{0}` has no rows")]
    EmptyClass(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("ragged row at line {line}: expected {expected} fields, got {got}")]
    RaggedRow { line: usize, expected: usize, got: usize },
    #[error("record `{id}` references unknown step {step}")]
    UnknownStep { id: String, step: u32 },
    #[error("record `{id}` has label `{label}` outside the manifest inventory")]
    UnknownLabel { id: String, label: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("step {0} has no rows")]
    EmptyStep(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class `{0}` has no labeled rows in the test step's train split")]
    MissingClass(String),
    #[error("test step {0} has no preceding step")]
    NoHistory(u32),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl SsaError {
    pub fn kind(&self) -> ErrorKind {
        use SsaError::*;
        match self {
            InvalidConfig(_) => ErrorKind::Usage,
            DimensionTooLarge { .. }
            | DegenerateInput(_)
            | NonFinite
            | TooFewSamples { .. }
            | SingleClass
            | FrameMismatch { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

impl From<csv::Error> for SsaError {
    fn from(e: csv::Error) -> Self {
        SsaError::Parse(e.to_string())
    }
}
