use thiserror::Error;

/// Failure modes of the ODMR models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdmrError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix exponential did not converge")]
    ExpmNonConvergence,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("stationary distribution is not unique without optical pumping")]
    DegenerateSteadyState,

    #[error("cycle map has no eigenvalue within {tol:e} of one (fixed-point residual {residual:e})")]
    NoUnitEigenvalue { residual: f64, tol: f64 },

    #[error("half-depth crossing is not bracketed by the detuning grid")]
    Unbracketed,

    #[error("sensitivity is not finite: {0}")]
    NonFiniteSensitivity(&'static str),

    #[error("spectrum is flat inside the search window")]
    FlatSpectrum,

    #[error("optimum lies on the boundary of `{dim}` (objective {objective:e})")]
    BoundaryOptimum {
        dim: String,
        objective: f64,
        argmin: Vec<(String, f64)>,
    },

    #[error("objective is not finite anywhere in the search space")]
    NoFiniteObjective,

    #[error("quadrature did not converge")]
    QuadratureNonConvergence,
}

pub type Result<T> = std::result::Result<T, OdmrError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> OdmrError {
    OdmrError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
