use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state count {0}: at least one state is required")]
    InvalidStateCount(u64),

    #[error("enumeration of {assignments} items exceeds budget {budget}")]
    BudgetExceeded { assignments: String, budget: u64 },

    #[error("pair parameter a = {0} outside [0, 1/2]")]
    InvalidPairParameter(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("wavefunctions live on different grids or times")]
    GridMismatch,

    #[error("time step {dt} violates the spectral phase bound (dt must be below {bound})")]
    Stability { dt: f64, bound: f64 },

    #[error("boundary contamination: edge amplitude {amplitude:e} at t = {time}")]
    BoundaryContamination { amplitude: f64, time: f64 },

    #[error("measurement criterion not met within {steps} steps (t = {time})")]
    MeasurementNotReached { steps: usize, time: f64 },

    #[error("premature measurement: {0}")]
    PrematureMeasurement(String),

    #[error("calibration failed: {reason}; record (V0, T): {record:?}")]
    Calibration {
        reason: String,
        record: Vec<(f64, f64)>,
    },

    #[error("antisymmetrized state vanishes: |s|^2 = {overlap_sqr}")]
    PauliDegenerate { overlap_sqr: f64 },

    #[error("joint probabilities sum to {0}, expected 1")]
    Consistency(f64),

    #[error("grid of {points} points exceeds the quadrature oracle limit of {limit}")]
    GridTooLarge { points: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Short machine-readable tag, used for invalid sweep rows.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidStateCount(_) => "invalid-state-count",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::InvalidPairParameter(_) => "invalid-pair-parameter",
            Error::Config(_) | Error::Parse(_) => "config",
            Error::GridMismatch => "grid-mismatch",
            Error::Stability { .. } => "stability",
            Error::BoundaryContamination { .. } => "boundary-contamination",
            Error::MeasurementNotReached { .. } => "measurement-not-reached",
            Error::PrematureMeasurement(_) => "premature-measurement",
            Error::Calibration { .. } => "calibration",
            Error::PauliDegenerate { .. } => "pauli-degenerate",
            Error::Consistency(_) => "consistency",
            Error::GridTooLarge { .. } => "grid-too-large",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
