use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown kernel shape `{0}` (expected bump, uniform or quadratic)")]
    UnknownShape(String),

    #[error("grid spacing {spacing} does not resolve kernel radius {radius} (need spacing <= radius / 4)")]
    UnresolvedKernel { spacing: f64, radius: f64 },

    #[error("kernel radius {radius} does not fit in the periodic cell of half-length {half_length}")]
    KernelExceedsDomain { radius: f64, half_length: f64 },

    #[error("field lives on a different grid than the operator")]
    GridMismatch,

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("window radius {radius} exceeds half the domain half-length {limit}")]
    WindowTooLarge { radius: f64, limit: f64 },

    #[error("truncation: domain half-length {half_length} is below the required budget {required}")]
    DomainBudget { half_length: f64, required: f64 },

    #[error("tail law violated: |x|^alpha u deviates from {amplitude} by {deviation:.3e} (allowed {allowed:.1e})")]
    TailLaw { amplitude: f64, deviation: f64, allowed: f64 },

    #[error("alpha = {alpha} is not below the dimension {dimension}; use the logarithmic case")]
    LogCaseRequired { alpha: f64, dimension: usize },

    #[error("time {t} is too small for the logarithmic rescaling (need t >= e^2)")]
    LogTimeTooSmall { t: f64 },

    #[error("time {requested} is not among the stored snapshots")]
    MissingSnapshot { requested: f64 },

    #[error("Picard iteration is not a contraction: {0}")]
    NonContraction(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("rate fit needs at least 4 positive points, got {0}")]
    TooFewPoints(usize),

    #[error("Duhamel quadrature did not converge with {nodes} nodes (relative change {change:.3e})")]
    InsufficientSnapshots { nodes: usize, change: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
