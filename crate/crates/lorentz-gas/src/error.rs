use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or domain-type invariant was violated at construction.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Impact vector is not orthogonal to the incoming momentum.
    #[error("impact vector not orthogonal to incoming momentum (|b.p_hat| = {dot:e})")]
    NonOrthogonalImpact { dot: f64 },

    /// The collision integrator gave up before the particle left the
    /// interaction region; signals a trapped or low-energy orbit that the
    /// Markov model excludes.
    #[error("collision not finished after {steps} integrator steps")]
    MaxStepsExceeded { steps: usize },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge (best error estimate {best:e}, tolerance {tol:e})")]
    QuadratureNotConverged { best: f64, tol: f64 },

    /// The vector chain reached a state below the energy floor.
    #[error("energy floor breached at step {step}")]
    EnergyFloorBreached { step: usize },

    /// A chain run failed mid-way; reports the offending step.
    #[error("chain aborted at step {step}: {source}")]
    ChainAborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Evaluation outside the covered interval.
    #[error("argument {value} outside covered range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    /// Drift step too large for the distance to the reflecting floor.
    #[error("SDE drift step {step:e} too large for distance {dist:e} to the floor")]
    StepTooLarge { step: f64, dist: f64 },

    /// Coefficient configuration makes the stationary density non-normalizable.
    #[error("stationary density not normalizable: {0}")]
    NotNormalizable(String),

    /// Histogram edges are not strictly increasing (or too few).
    #[error("bad histogram edges: {0}")]
    BadEdges(String),

    /// Not enough data (or weight) for the requested estimator.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Trajectory too short for mean-squared-displacement analysis.
    #[error("trajectory too short: {0}")]
    TooShort(String),

    /// Run-configuration problem (names the offending field where possible).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
