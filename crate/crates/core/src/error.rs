use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("degenerate control basis: {0}")]
    DegenerateBasis(String),
    #[error("time-degenerate endpoints: |delta| = {delta} is below the floor {floor}")]
    TimeDegenerate { delta: f64, floor: f64 },
    #[error("CFL violation: dt = {dt} exceeds the stable limit; suggested dt = {suggested}")]
    Cfl { dt: f64, suggested: f64 },
    #[error("solver diverged at step {step}")]
    Divergence { step: usize },
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported mode: {0}")]
    Unsupported(String),
    #[error("numerical check failed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 1 numerical failure, 2 input error, 3 unsupported mode.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular(_)
            | Error::DegenerateBasis(_)
            | Error::TimeDegenerate { .. }
            | Error::Divergence { .. }
            | Error::CheckFailed(_) => 1,
            Error::Unsupported(_) => 3,
            Error::InvalidSpec(_)
            | Error::InvalidParameters(_)
            | Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange(_)
            | Error::Cfl { .. }
            | Error::Geometry(_)
            | Error::Parse(_)
            | Error::Io(_) => 2,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
