use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("topology error at {entity} {index}: {message}")]
    Topology {
        entity: &'static str,
        index: usize,
        message: String,
    },

    #[error("mesh generation failed at cell {cell}: {message}")]
    Generation { cell: usize, message: String },

    #[error("quadrature of degree {requested} requested, maximum supported degree is {max}")]
    UnsupportedDegree { requested: usize, max: usize },

    #[error("singular or indefinite matrix: {0}")]
    SingularMatrix(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("linear solver failed after {iterations} iterations, relative residual {residual:e}")]
    SolverBreakdown { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown built-in solution {0}, expected 1 or 2")]
    UnknownSolution(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
