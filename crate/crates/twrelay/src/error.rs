use thiserror::Error;

/// Errors surfaced by the numerical routines, the decision policy and the
/// threshold solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Arguments are individually valid but mutually inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature exhausted its subdivision budget. Carries the
    /// best estimate reached and the error bound attached to it.
    #[error("quadrature did not converge: best estimate {estimate}, error bound {error_bound}")]
    QuadratureFailed { estimate: f64, error_bound: f64 },

    /// Threshold pair sits on a boundary where the integration-limit
    /// exponents are undefined (`lambda = -1`, `mu = -1` or
    /// `lambda + mu + 1 = 0`).
    #[error("singular thresholds: {0}")]
    SingularThresholds(String),

    /// Decision rule invoked with thresholds outside the feasible region.
    #[error("infeasible thresholds: lambda = {lambda}, mu = {mu}")]
    InfeasibleThresholds { lambda: f64, mu: f64 },

    /// Root finder exhausted its budget. Carries the best iterate and its
    /// residuals.
    #[error(
        "solver did not converge after {iterations} iterations: \
         lambda = {lambda}, mu = {mu}, h1 = {h1}, h2 = {h2}"
    )]
    SolverStalled {
        lambda: f64,
        mu: f64,
        h1: f64,
        h2: f64,
        iterations: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
