use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate:.3e} vs tolerance {tol:.3e} after {evaluations} evaluations")]
    QuadratureNonconvergence {
        a: f64,
        b: f64,
        estimate: f64,
        tol: f64,
        evaluations: usize,
    },

    #[error("principal value unstable at lambda = {lambda}: {detail}")]
    PrincipalValue { lambda: f64, detail: String },

    #[error("singular Aronszajn-Krein matrix at lambda = {lambda} (|det| = {det:.3e}, smallest minor {minor:?})")]
    SingularMatrix {
        lambda: f64,
        det: f64,
        minor: Vec<usize>,
    },

    #[error("Neumann expansion refused: radius bound {radius:.4} >= 1")]
    Divergence { radius: f64 },

    #[error("epsilon extrapolation unstable: {0}")]
    ExtrapolationInstability(String),

    #[error("spectral margin {margin:.3e} <= floor at lambda = {lambda}")]
    SpectralMargin { lambda: f64, margin: f64 },

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("time budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
