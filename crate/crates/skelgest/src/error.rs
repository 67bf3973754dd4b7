use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("annotation references unknown sequence '{0}'")]
    UnknownSequence(String),

    #[error("span [{start}, {end}] out of range for sequence '{id}' of {len} frames")]
    SpanOutOfRange {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("window of {got} frames is too short (need at least {need})")]
    WindowTooShort { got: usize, need: usize },

    #[error("crop [{start}, {start}+{len}) out of range for {seq_len} frames")]
    CropOutOfRange {
        start: usize,
        len: usize,
        seq_len: usize,
    },

    #[error("frame has no rotations but the requested feature needs quaternions")]
    MissingQuaternions,

    #[error("frame vector recipe needs kinematics but none were supplied")]
    MissingKinematics,

    #[error("dataset z-score normalization requested without training statistics")]
    MissingStats,

    #[error("no training examples for class {0}")]
    MissingClass(String),

    #[error("shape mismatch in layer '{layer}': {msg}")]
    ShapeMismatch { layer: String, msg: String },

    #[error("training diverged: loss is not finite ({0})")]
    NonFiniteLoss(f64),

    #[error("need at least {need} sequences, got {got}")]
    TooFewSequences { need: usize, got: usize },

    #[error("ensemble members use different class sets")]
    HeterogeneousEnsemble,

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
