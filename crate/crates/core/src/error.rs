use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// The variants are grouped so that the command-line front end can map them
/// onto distinct exit codes (see [`LabError::exit_code`]).
#[derive(Debug, Error)]
pub enum LabError {
    /// A parameter lies outside the admissible range of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampling grid or quadrature rule is too coarse for the field.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// The quadrature rule needed would exceed the configured node budget.
    #[error("node budget exceeded: {needed} nodes required, budget is {budget}")]
    Budget { needed: usize, budget: usize },

    /// A harmonic-sum construction step violated a coefficient bound.
    #[error("construction error at rotation s={s}, term {term}: {detail}")]
    Construction { s: u32, term: usize, detail: String },

    /// Two independent routes to the same quantity disagree.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A requested verification did not meet its tolerance.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub fn resolution(msg: impl Into<String>) -> Self {
        LabError::Resolution(msg.into())
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Domain(_) | LabError::Construction { .. } => 2,
            LabError::Resolution(_) | LabError::Budget { .. } => 3,
            LabError::Verification(_) | LabError::Consistency(_) => 4,
            LabError::Io(_) | LabError::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
