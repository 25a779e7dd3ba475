use alloc::string::String;
use num_complex::Complex64;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("polynomial is not selfadjoint")]
    NotSelfadjoint,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),

    #[error("fixed point did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("spectral radius {radius} is not below 1")]
    RadiusTooLarge { radius: f64 },

    #[error("operator logarithm series exceeded its budget of {terms} terms")]
    SeriesBudget { terms: usize },

    #[error("eigensolver failed to converge")]
    Eigensolver,

    #[error("derivative system singular")]
    DerivativeSingular,

    #[error("derivative unreliable: estimates {coarse} (h) and {fine} (h/2) differ by {discrepancy:e}")]
    DerivativeUnreliable {
        coarse: Complex64,
        fine: Complex64,
        discrepancy: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::NoConvergence { .. }
                | Error::RadiusTooLarge { .. }
                | Error::SeriesBudget { .. }
                | Error::Eigensolver
                | Error::DerivativeSingular
                | Error::DerivativeUnreliable { .. }
        )
    }

    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NotSelfadjoint => "not_selfadjoint",
            Error::InvalidInput(_) => "invalid_input",
            Error::Singular(_) => "singular",
            Error::NoConvergence { .. } => "no_convergence",
            Error::RadiusTooLarge { .. } => "radius_violation",
            Error::SeriesBudget { .. } => "series_budget",
            Error::Eigensolver => "eigensolver",
            Error::DerivativeSingular => "derivative_singular",
            Error::DerivativeUnreliable { .. } => "derivative_unreliable",
            Error::GridMismatch(_) => "grid_mismatch",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
