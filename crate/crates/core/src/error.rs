use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the zero wavevector is excluded (mean-zero fields)")]
    ZeroWaveVector,

    #[error("resolution mismatch: {left} vs {right}")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("grid of size {grid} aliases modes up to |k_i| = {resolution} (need at least {required})")]
    Aliasing {
        grid: usize,
        resolution: usize,
        required: usize,
    },

    #[error("padding factor {0} cannot dealias a quadratic product (need >= 1.5)")]
    InsufficientPadding(f64),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(&'static str),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite state at step {step}")]
    BlowUp { step: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("missing accumulator: {0}")]
    MissingAccumulator(String),

    #[error("unknown configuration key `{key}`; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("invalid value for `{key}`: {value}")]
    InvalidValue { key: String, value: String },

    #[error("control construction failed: {0}")]
    ControlFailed(String),

    #[error("selection tie persists among {0} candidates")]
    SelectionTie(usize),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
