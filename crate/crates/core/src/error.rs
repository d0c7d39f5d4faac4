use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation point lies within {distance:.3e} m of a source singularity")]
    SingularPoint { distance: f64 },
    #[error("field magnitude {magnitude:.3e} T is too small to define a gradient of |B|")]
    ZeroField { magnitude: f64 },
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate conic: {0}")]
    DegenerateConic(String),
    #[error("conic is not an ellipse")]
    NotAnEllipse,
    #[error("ambiguous phase unwrapping: {0}")]
    AmbiguousUnwrap(String),
    #[error("baseline directions are {angle_deg:.2}° apart; at least 5° required")]
    SingularFrame { angle_deg: f64 },
    #[error("missing gradient component {0}")]
    MissingComponent(String),
    #[error("largest eigenvalues are not separated (relative gap {gap:.3e})")]
    DegenerateEigenvalues { gap: f64 },
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) => 1,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
            _ => 2,
        }
    }
}
