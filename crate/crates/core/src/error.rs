use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error(
        "CFL condition violated in cell {cell}: outflow ratio {ratio:.6} > 1; admissible dt <= {dt_max:.6e}"
    )]
    Cfl { cell: usize, ratio: f64, dt_max: f64 },

    #[error("reversal condition violated: max|delta_K| dt = {max_div_dt:.6} >= 1 - eta = {limit:.6}")]
    ReversalCondition { max_div_dt: f64, limit: f64 },

    #[error("enumeration guard exceeded: {support}^{steps} paths > {limit}; use fewer steps")]
    EnumerationGuard { support: usize, steps: usize, limit: f64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mesh(msg: impl Into<String>) -> Self {
        Error::InvalidMesh(msg.into())
    }
}
