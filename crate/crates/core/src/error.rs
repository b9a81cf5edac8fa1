use alloc::string::String;

use num_complex::Complex64;

/// Errors raised by model construction, the SSM solver and the integrators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SsmError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix {matrix} is not symmetric (relative deviation {deviation:e})")]
    Asymmetric { matrix: &'static str, deviation: f64 },

    #[error("mass matrix is singular or indefinite (eigenvalues in [{min:e}, {max:e}])")]
    SingularMass { min: f64, max: f64 },

    #[error("integer overflow while {0}")]
    Overflow(&'static str),

    #[error("linear transform is numerically singular (condition number {condition:e})")]
    SingularTransform { condition: f64 },

    #[error("fixed point is not asymptotically stable: eigenvalue {eigenvalue} has non-negative real part")]
    UnstableSpectrum { eigenvalue: Complex64 },

    #[error("linear part is not semisimple (eigenvector condition number {condition:e})")]
    DefectiveMatrix { condition: f64 },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("invalid master mode selection: {0}")]
    InvalidMode(String),

    #[error("order {order} requested before all lower orders were solved")]
    MissingLowerOrder { order: usize },

    #[error("SSM expansion order {order} exceeds the supported maximum {cap}")]
    OrderTooLarge { order: usize, cap: usize },

    #[error(
        "outer resonance breakdown at order {order}: {a}·λ_j1 + {b}·λ_j2 = {lambda}, the eigenvalue of mode {mode} (spectrum position {index}, |denominator| = {denominator:e})"
    )]
    OuterResonanceBreakdown {
        order: usize,
        a: usize,
        b: usize,
        /// One-based position of the resonant eigenvalue in the spectrum
        /// sorted by decreasing real part.
        index: usize,
        /// One-based mode number, counting a conjugate pair once.
        mode: usize,
        lambda: Complex64,
        denominator: f64,
    },

    #[error("polar reduced dynamics need an underdamped (complex conjugate) master pair")]
    RealMasterPairUnsupported,

    #[error("reduced dynamics violate conjugate symmetry at key ({a},{b}) (mismatch {mismatch:e})")]
    ConjugateSymmetry { a: usize, b: usize, mismatch: f64 },

    #[error("physical state has a non-negligible imaginary part (relative {relative:e})")]
    NonNegligibleImaginaryPart { relative: f64 },

    #[error("reduced trajectory left the expansion's validity region (rho = {rho} at t = {t})")]
    BlowUp { t: f64, rho: f64 },

    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("reduced trajectory did not reach rho = {rho_eps} before t = {t_max}")]
    EventNotReached { rho_eps: f64, t_max: f64 },
}

/// Coarse classification of [`SsmError`], used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Spectral,
    Resonance,
    Integration,
}

impl SsmError {
    pub fn kind(&self) -> ErrorKind {
        use SsmError::*;
        match self {
            InvalidParameter { .. }
            | DimensionMismatch { .. }
            | Asymmetric { .. }
            | SingularMass { .. }
            | Overflow(_)
            | InvalidMode(_)
            | MissingLowerOrder { .. }
            | OrderTooLarge { .. } => ErrorKind::Input,
            SingularTransform { .. }
            | UnstableSpectrum { .. }
            | DefectiveMatrix { .. }
            | EigenFailure
            | RealMasterPairUnsupported
            | ConjugateSymmetry { .. }
            | NonNegligibleImaginaryPart { .. } => ErrorKind::Spectral,
            OuterResonanceBreakdown { .. } => ErrorKind::Resonance,
            BlowUp { .. } | StepFailure { .. } | TooManySteps(_) | EventNotReached { .. } => ErrorKind::Integration,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        SsmError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
