//! Error type shared by all modules.

use thiserror::Error;

/// Failures raised by the numerical core.
///
/// Variants carry plain `f64` payloads so that the error type does not depend
/// on the scalar parameter of the routine that produced it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    /// The rotation number is rational to working precision.
    #[error("rotation number is rational to working precision (dist({n}ω, ℤ) = 0)")]
    DegenerateRotation { n: u64 },
    /// An interval system was used without declared return/confinement times.
    #[error("interval system {index} has no declared return/confinement constants")]
    MissingSystemConstants { index: usize },
    /// The projective orbit passed through the vertical direction `(0, 1)`.
    #[error("projective orbit hit a pole at θ = {theta}")]
    PoleHit { theta: f64 },
    /// A renormalised matrix product still over- or underflowed.
    #[error("matrix product overflowed despite renormalisation")]
    ScaleOverflow,
    /// Two orbits that should share their base angles do not.
    #[error("orbits are not aligned fibre-wise: {reason}")]
    FibreMismatch { reason: String },
    /// A section used for a Birkhoff average took a non-positive value.
    #[error("section value {value} at θ = {theta} is not positive")]
    InvalidSection { theta: f64, value: f64 },
    /// A pullback left the positive cone, so the cocycle is not uniformly
    /// hyperbolic at this energy (or the horizon is too short).
    #[error("pullback left the invariant cone at θ = {theta} after {step} steps (r = {value})")]
    NotUniformlyHyperbolic { theta: f64, step: u64, value: f64 },
    /// Horizon doubling reached its cap before two horizons agreed.
    #[error("no convergence up to horizon {horizon} (last change {change:e})")]
    NoConvergence { horizon: u64, change: f64 },
    /// A finite-difference stencil point failed to converge.
    #[error("finite-difference stencil not converged: {reason}")]
    StencilError { reason: String },
    /// The coupling is too small for the first recovery time to be positive.
    #[error("coupling too small: M₀ = 0; need λ ≥ {lambda_threshold}")]
    CouplingTooSmall { lambda_threshold: f64 },
    /// An orbit did not reach its target set within the step cap.
    #[error("orbit did not reach the target set within {cap} steps")]
    HorizonExceeded { cap: u64 },
    /// A stopping time was requested at an angle outside the collision window.
    #[error("θ = {theta} is outside the collision window (d = {gap} ≥ {threshold})")]
    NotInCollisionWindow { theta: f64, gap: f64, threshold: f64 },
    /// No ladder level matches the observed stopping times.
    #[error("no ladder level up to {max_level} matches max σ = {sigma}")]
    LadderExhausted { max_level: usize, sigma: u64 },
    /// The bracket does not straddle the predicate change.
    #[error("invalid bracket [{lo}, {hi}]: {reason}")]
    BracketInvalid { lo: f64, hi: f64, reason: String },
    /// A fit was requested on samples that do not span enough decades.
    #[error("samples span {decades:.3} decades with {count} points; need ≥ {min_decades} decades and ≥ {min_count} points")]
    SpanTooNarrow { decades: f64, count: usize, min_decades: f64, min_count: usize },
    /// The potential violates the unique non-degenerate minimum requirement.
    #[error("invalid potential: {reason}")]
    InvalidPotential { reason: String },
    /// A parameter is outside its admissible range.
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },
}

impl LabError {
    /// Shorthand for [`LabError::InvalidInput`].
    pub fn invalid(reason: impl Into<String>) -> Self {
        LabError::InvalidInput { reason: reason.into() }
    }

    /// Whether the failure signals loss of uniform hyperbolicity (as opposed to
    /// bad input), i.e. evidence that the energy is at or above the edge.
    pub fn is_hyperbolicity_failure(&self) -> bool {
        matches!(
            self,
            LabError::NotUniformlyHyperbolic { .. } | LabError::NoConvergence { .. } | LabError::PoleHit { .. }
        )
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, LabError>;
