use thiserror::Error;

/// Errors raised anywhere in the analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency axis: {0}")]
    InvalidAxis(String),

    #[error("invalid angle grid: {0}")]
    InvalidAngles(String),

    #[error("frequency axis mismatch between sweep and calibration trace")]
    AxisMismatch,

    #[error("calibration sample {index} is zero")]
    ZeroCalibration { index: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("noise region [{lo:e}, {hi:e}) s contains no delay bins")]
    EmptyNoiseRegion { lo: f64, hi: f64 },

    #[error("power delay profile has no noise floor estimate")]
    MissingNoiseFloor,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a gated power delay profile")]
    Ungated,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("delay axes of the profiles do not match")]
    DelayAxisMismatch,

    #[error("first arrival {0:e} s lies outside the unambiguous delay span")]
    FirstArrivalOutOfSpan(f64),

    #[error("unusable link: {0}")]
    UnusableLink(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate regression design: all abscissae are equal")]
    DegenerateDesign,

    #[error("model table: {0}")]
    ModelTable(String),

    #[error("sweep file: {0}")]
    SweepFormat(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
