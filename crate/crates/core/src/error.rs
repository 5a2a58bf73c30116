//! Shared error type for the whole library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the library.
///
/// Variants split into three rough groups that the CLI maps to exit codes:
/// input parsing (`Json`), domain violations (invalid exponents, angles,
/// coefficient shapes, out-of-domain evaluation points, missing structural
/// preconditions) and numerical failures (quadrature budget, series
/// divergence, ill-conditioned solves, fit residuals, non-convergent
/// extrapolation).
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("JSON parse error at line {line}, column {column}: {msg}")]
    Json {
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("invalid exponent pair (p, q) = ({p}, {q}): {reason}")]
    InvalidExponents { p: i64, q: i64, reason: String },

    #[error("switching angle theta1 = {theta1} outside (0, 2*pi]")]
    ThetaOutOfRange { theta1: f64 },

    #[error("coefficient table for {name} has {got} rows, expected m + 1 = {expected}")]
    CoefficientShape {
        name: String,
        got: usize,
        expected: usize,
    },

    #[error("theta1 = 2*pi requires equal coefficients on both zones ({what})")]
    SmoothnessMismatch { what: String },

    #[error("exponent beta = {beta} must not be a non-negative integer")]
    IntegerBeta { beta: f64 },

    #[error("base 1 + rho - cos(theta) changes sign on [{a:.6}, {b:.6}] at rho = {rho}")]
    SignChange { a: f64, b: f64, rho: f64 },

    #[error(
        "quadrature budget of {max} subintervals exhausted on [{a:.6}, {b:.6}] \
         (err {err:.3e}, goal {goal:.3e})"
    )]
    QuadratureBudget {
        a: f64,
        b: f64,
        max: usize,
        err: f64,
        goal: f64,
    },

    #[error("series approximation of {what} did not converge: {detail}")]
    SeriesDivergence { what: String, detail: String },

    #[error("rho-derivative order {order} exceeds the supported maximum {max}")]
    DerivativeOrder { order: usize, max: usize },

    #[error("rho = {rho} outside the admissible set {domain}")]
    RhoOutsideDomain { rho: f64, domain: String },

    #[error("{what} requires the first-order vanishing conditions; violated: {violations:?}")]
    CenterRequired {
        what: String,
        violations: Vec<String>,
    },

    #[error("structured fit residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    StructuredFit { residual: f64, tol: f64 },

    #[error("linear system is numerically singular: {detail}")]
    IllConditioned { detail: String },

    #[error("realization produced {got} zeros, expected {expected}")]
    RealizationCount { got: usize, expected: usize },

    #[error("extrapolation did not converge: {detail}")]
    NoConvergence { detail: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Process exit code the CLI uses for this error: 1 for malformed input
    /// files, 2 for domain violations, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Json { .. } => 1,
            InvalidExponents { .. }
            | ThetaOutOfRange { .. }
            | CoefficientShape { .. }
            | SmoothnessMismatch { .. }
            | IntegerBeta { .. }
            | RhoOutsideDomain { .. }
            | DerivativeOrder { .. }
            | CenterRequired { .. }
            | Invalid(_) => 2,
            SignChange { .. }
            | QuadratureBudget { .. }
            | SeriesDivergence { .. }
            | StructuredFit { .. }
            | IllConditioned { .. }
            | RealizationCount { .. }
            | NoConvergence { .. } => 3,
        }
    }
}
