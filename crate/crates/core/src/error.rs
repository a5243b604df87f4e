use thiserror::Error;

/// Errors raised by the forward and inverse solvers.
///
/// Each variant names the condition, not the call site; callers that need
/// the failing operation (the CLI does) wrap it with their own context.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate horizons: {0}")]
    DegenerateHorizons(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root finding did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("adaptive quadrature exhausted its budget: {0}")]
    QuadratureFailure(String),

    #[error("pole of the gamma function at w = {0}")]
    Pole(f64),

    #[error("bessel function overflows double precision at x = {0}; use the log-scaled variant")]
    OverflowGuard(f64),

    #[error("Faddeev series would need more than {cap} terms (|z|*A = {za:.3})")]
    TruncationBudgetExceeded { cap: usize, za: f64 },

    #[error("ODE step size underflow at x = {x:.6e} (step {step:.3e})")]
    StepSizeUnderflow { x: f64, step: f64 },

    #[error("Wronskian transfer matrix is undefined at z = 0")]
    ZeroCoupling,

    #[error("|a_L1| = {0:.3e} is below the pole threshold; T has a pole here")]
    PoleOfT(f64),

    #[error("zero energy: scattering data at lambda = 0 only carries the total A")]
    ZeroEnergy,

    #[error("phase unwrapping is ambiguous: {0}")]
    PhaseWrapAmbiguity(String),

    #[error("potential is not of dS-RN form: {0}")]
    InconsistentPotential(String),

    #[error("numerical differentiation failed: {0}")]
    NumericalDifferentiationFailure(String),

    #[error("ill-posed fit: {reason}")]
    IllPosed { reason: String, null_direction: Vec<f64> },

    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
