use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter left its mathematical domain, e.g. an exponential moment
    /// requested at or beyond the abscissa of convergence.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative procedure failed to converge within its budget.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A structural parameter is out of range (e.g. a patch breakpoint
    /// outside the period).
    #[error("range error: {0}")]
    Range(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// A loaded problem instance violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The growth eigenvalue at mu = 0 does not exceed 1, so the speed
    /// quotient has no interior minimum.
    #[error("no speed: {0}")]
    NoSpeed(String),

    /// ln lambda(mu)/mu is still decreasing at the edge of the admissible
    /// mu interval; the infimum sits at the abscissa of convergence.
    #[error("unbounded minimization: {0}")]
    Unbounded(String),

    #[error("near-singular linear system: {0}")]
    SingularSystem(String),

    #[error("positivity failure: {0}")]
    Positivity(String),

    /// The invasion front reached the right guard band.
    #[error("front lost at step {step}: {message}")]
    FrontLost { step: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The Weinberger recursion tail did not stabilize.
    #[error("inconclusive recursion: {0}")]
    Inconclusive(String),

    /// A CSV input did not have the expected columns.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for bad inputs, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Range(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Schema(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
