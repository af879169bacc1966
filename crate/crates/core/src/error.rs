use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    /// Some eigenvalue sum of the coefficient pair is (numerically) zero, so the
    /// Sylvester/Lyapunov equation named by `equation` has no unique solution.
    #[error("singular pencil in {equation}: min |λi + μj| = {gap:e}")]
    SingularPencil { equation: String, gap: f64 },

    #[error("resolvent (sI - A) is numerically singular at s = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("requested order {requested} exceeds numerical rank {rank} of the Gramian product")]
    RankDeficient { requested: usize, rank: usize },

    #[error("fixed-point iteration diverged at iteration {iteration}: cost {cost:e} vs initial {initial:e}")]
    IterationDiverged { iteration: usize, cost: f64, initial: f64 },

    #[error("projection normalization W^T V is singular")]
    NormalizationSingular,

    #[error("reduced matrix is not diagonalizable (eigenvector condition {condition:e})")]
    NonDiagonalizable { condition: f64 },

    #[error("reduced model has repeated poles (separation {separation:e})")]
    RepeatedPoles { separation: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Re-labels a solver failure with the equation it came from.
    pub(crate) fn in_equation(self, name: &str) -> Self {
        match self {
            Error::SingularPencil { gap, .. } => Error::SingularPencil {
                equation: name.to_string(),
                gap,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
