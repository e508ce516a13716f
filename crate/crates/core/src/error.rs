use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    UnstableScheme { dt: f64, bound: f64 },

    #[error("diffusivities must be positive, got ({0}, {1})")]
    NonPositiveDiffusivity(f64, f64),

    #[error("parameter grid axis {axis} yields no points")]
    EmptyGrid { axis: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("rank {r} is too large for a {rows}x{cols} snapshot matrix")]
    RankTooLarge { r: usize, rows: usize, cols: usize },

    #[error("snapshot data is identically zero")]
    DegenerateData,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Gram-Schmidt breakdown in frame block {block}, proposal row {row}")]
    GramSchmidtBreakdown { block: usize, row: usize },

    #[error("lift is not horizontal: max |phi_i^T z_i| = {residual:e}")]
    NotHorizontal { residual: f64 },

    #[error("basepoint alignment is numerically singular (condition number {condition:e})")]
    SingularAlignment { condition: f64 },

    #[error("kernel matrix is ill-conditioned (condition number {condition:e})")]
    IllConditionedKernel { condition: f64 },

    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("optimal projection error is zero, relative error is undefined")]
    ZeroOptimalError,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnstableScheme { .. }
                | Error::DegenerateData
                | Error::GramSchmidtBreakdown { .. }
                | Error::SingularAlignment { .. }
                | Error::IllConditionedKernel { .. }
                | Error::OptimizationFailed(_)
                | Error::ZeroOptimalError
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::SchemaMismatch(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::SchemaMismatch(format!("{other:?}")),
        }
    }
}
