use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} is outside [{t0}, {t_end}]")]
    OutOfRange { t: f64, t0: f64, t_end: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("objects live on different time grids")]
    GridMismatch,

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("initial operator is not invertible (condition number {cond:e})")]
    NotInvertible { cond: f64 },

    #[error("integration diverged near t = {t}")]
    Divergence { t: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("trajectory is not admissible: control residual {residual:e} exceeds {tolerance:e}")]
    NotAdmissible { residual: f64, tolerance: f64 },

    #[error("iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Gram matrix is rank deficient and the constraints are inconsistent (violation {violation:e}); use a positive ridge")]
    RankDeficient { violation: f64 },
}
