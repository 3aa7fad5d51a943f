use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid order s = {0}: must lie in (0, 1)")]
    InvalidOrder(f64),

    #[error("invalid spectral measure: {0}")]
    InvalidMeasure(String),

    /// The directional 2s-moment vanishes in some direction (measure supported on a hyperplane).
    #[error("degenerate spectral measure: lambda = {lambda:e} < 1e-10 * mass = {mass:e}")]
    DegenerateMeasure { lambda: f64, mass: f64 },

    #[error("resolution error: {0}")]
    ResolutionError(String),

    #[error("quadrature budget exceeded: error bound {bound:e} > tol {tol:e} ({context})")]
    QuadratureBudgetExceeded {
        bound: f64,
        tol: f64,
        context: String,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("config error: {0}")]
    ConfigError(String),
}
