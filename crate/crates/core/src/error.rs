use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Verification outcomes (an inequality that fails on some instance) are
/// reported as data in the various report types, not through this enum.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("potential pair failed validation: {0}")]
    Validation(String),

    #[error("zero-energy solution changes sign near r = {radius}; scattering length undefined (bound state)")]
    BoundStateDetected { radius: f64 },

    #[error("domain radius {extent} must exceed the potential range {range}")]
    DomainTooSmall { extent: f64, range: f64 },

    #[error("no admissible root: {0}")]
    NoRoot(String),

    #[error("grid step {step} is not below {limit} inside the repulsive core")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("operator needs about {required} bytes, budget is {budget} bytes")]
    ResourceLimit { required: u64, budget: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("hypothesis violated: gap {gap} < 4 * x_inf = {}", 4.0 * x_inf)]
    HypothesisViolated { gap: f64, x_inf: f64 },

    #[error("wavefunction norm {norm} deviates from 1")]
    NormalizationError { norm: f64 },

    #[error("pointwise comparison `{which}` fails at r = {radius} (margin {margin})")]
    PointwiseViolation {
        which: String,
        radius: f64,
        margin: f64,
    },

    #[error("no admissible tilde-ell: v1(0) = {v1_at_zero} is not positive")]
    NoAdmissibleTildeEll { v1_at_zero: f64 },

    #[error("epsilon = {0} outside (0, 1/31)")]
    EpsilonOutOfRange(f64),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
