use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("degenerate interpolation points: {0}")]
    DegeneratePoints(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("point is not in the interior of the cone")]
    InfeasiblePoint,

    #[error("lifted matrix is numerically singular at this point")]
    SingularPoint,

    #[error("barrier Hessian is numerically singular")]
    NumericallySingularHessian,

    #[error("formulation mismatch: {0}")]
    FormulationMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
