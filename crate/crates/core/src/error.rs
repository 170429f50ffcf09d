use thiserror::Error;

pub type Result<T, E = BdieError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdieError {
    #[error("degenerate parametrization: speed {speed:e} at t = {t}")]
    DegenerateParametrization { t: f64, speed: f64 },

    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("coefficient positivity violated: a = {value:e} at ({x}, {y})")]
    Positivity { value: f64, x: f64, y: f64 },

    #[error("singular kernel evaluation at coincident points ({x}, {y})")]
    SingularEvaluation { x: f64, y: f64 },

    #[error("point ({x}, {y}) is outside the exterior domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("incompatible right-hand side: |<f,1>| = {mean:e} exceeds {tol:e}")]
    Compatibility { mean: f64, tol: f64 },

    #[error("coefficient conditions violated: {0}")]
    Conditions(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),
}

/// Coarse classification used by front-ends to choose exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Geometry,
    Conditions,
    Solver,
}

impl BdieError {
    pub fn category(&self) -> ErrorCategory {
        use BdieError::*;
        match self {
            DegenerateParametrization { .. } | Geometry(_) | OutsideDomain { .. } => {
                ErrorCategory::Geometry
            }
            InvalidDiscretization(_) | UnknownName(_) | SingularEvaluation { .. } | Assembly(_) => {
                ErrorCategory::Input
            }
            Positivity { .. } | Compatibility { .. } | Conditions(_) => ErrorCategory::Conditions,
            Singular(_) | NoConvergence(_) => ErrorCategory::Solver,
        }
    }
}
