use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("conforming closure exceeded {limit} sweeps; element type tags are inconsistent")]
    ClosureDepthExceeded { limit: u32 },

    #[error("finite element space error: {0}")]
    Space(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("eigensolver did not converge in {iterations} iterations (best residual {residual}, eigenvalue {lambda})")]
    EigNotConverged {
        iterations: usize,
        residual: f64,
        lambda: f64,
    },

    #[error("linear solve did not converge in {iterations} iterations (relative residual {residual})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("SCF iteration did not converge in {iterations} iterations (last density change {density_change}); history: {history:?}")]
    ScfNotConverged {
        iterations: usize,
        density_change: f64,
        /// Per-iteration (eigenvalue, density change) trail for diagnosis.
        history: Vec<(f64, f64)>,
    },

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("marking error: {0}")]
    Marking(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
