use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A precondition relating several inputs does not hold, e.g. a covariance
    /// whose support does not fit on the torus.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The grid does not resolve the covariance spectrum.
    #[error(
        "grid resolution too coarse: spectral envelope {envelope:.3e} at the Nyquist mode \
         exceeds tolerance {tolerance:.3e}; use at least N = {min_grid_points} points per axis"
    )]
    Resolution {
        envelope: f64,
        tolerance: f64,
        min_grid_points: usize,
    },

    /// A Monte Carlo estimate changed by more than its statistical error when
    /// the discretization was refined.
    #[error(
        "discretization bias: estimates at M = {grid_points} and 2M differ by {difference:.3e}, \
         more than their combined standard error {stderr:.3e}; use a larger M"
    )]
    Discretization {
        grid_points: usize,
        difference: f64,
        stderr: f64,
    },

    /// A certified lattice sum cannot reach the requested tolerance without
    /// exceeding the configured term budget.
    #[error(
        "tolerance {requested:.3e} unreachable within {max_terms} terms; \
         best certified tail bound is {achievable:.3e} at N_max = {n_max}"
    )]
    Truncation {
        requested: f64,
        achievable: f64,
        n_max: usize,
        max_terms: u64,
    },

    /// Adaptive quadrature did not converge.
    #[error("quadrature did not converge: estimate {estimate:.12e} with error {error:.3e} (target {target:.3e})")]
    Quadrature {
        estimate: f64,
        error: f64,
        target: f64,
    },

    /// Double precision cannot carry the requested evaluation.
    #[error("precision loss: {0}")]
    Precision(String),

    /// The simulator produced a non-positive field value.
    #[error("stability failure at t = {time:.4}: {reason}; try a larger N or a smaller dt")]
    Stability { time: f64, reason: String },

    /// The model family is not supported by this operation.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// A least-squares fit is numerically meaningless.
    #[error("ill-conditioned fit (condition number {condition:.3e}): {reason}")]
    IllConditioned { condition: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
