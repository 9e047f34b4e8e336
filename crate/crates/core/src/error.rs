use thiserror::Error;

use crate::exact::TransferMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma function pole near {0}")]
    Pole(String),

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("precision exhausted: {detail}")]
    PrecisionExhausted {
        detail: String,
        /// Last matrix computed before giving up, with its residuals.
        best_effort: Option<Box<TransferMatrix>>,
    },

    #[error("eigenvectors coalesce at theta = {theta} (exceptional point)")]
    EpDegeneracy { theta: f64 },

    #[error("exceptional point lies on the loop boundary")]
    OnBoundary,

    #[error("state norm overflow: |S| ~ 1e{log10_norm:.0} exceeds the precision budget")]
    Overflow { log10_norm: f64 },

    #[error("end state vanishes to working precision")]
    ZeroState,

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("condition profile has no samples")]
    EmptyProfile,

    #[error("degenerate eigenframe: {0}")]
    DegenerateFrame(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn precision(detail: impl Into<String>) -> Self {
        Error::PrecisionExhausted {
            detail: detail.into(),
            best_effort: None,
        }
    }

    /// Short machine-readable tag, used as a sweep cell status.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Pole(_) => "pole",
            Error::DegenerateParameter(_) => "degenerate_parameter",
            Error::PrecisionExhausted { .. } => "precision_exhausted",
            Error::EpDegeneracy { .. } => "ep_degeneracy",
            Error::OnBoundary => "on_boundary",
            Error::Overflow { .. } => "overflow",
            Error::ZeroState => "zero_state",
            Error::SingularMatrix => "singular_matrix",
            Error::EmptyProfile => "empty_profile",
            Error::DegenerateFrame(_) => "degenerate_frame",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        }
    }
}
