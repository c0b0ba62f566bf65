use thiserror::Error;

/// Errors produced by geometry construction, coupling assembly, integration
/// and observable evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cloud sampling could not satisfy the minimum-separation constraint.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The dipole kernel was evaluated at zero separation.
    #[error("singular kernel: emitters at zero separation")]
    SingularKernel,

    /// The dissipation matrix failed its positivity tolerance. This signals a
    /// numerical failure in the kernel or eigensolver, not physics.
    #[error("coupling-matrix inconsistency: {0}")]
    KernelInconsistency(String),

    /// A trajectory produced a non-finite phase-space coordinate.
    #[error("numerical blow-up in trajectory {trajectory} at step {step}")]
    NumericalBlowup { trajectory: u64, step: u64 },

    /// More than 1% of trajectories blew up; the run is not trustworthy.
    #[error("{blown} of {total} trajectories blew up (> 1%)")]
    BlowupFraction { blown: u64, total: u64 },

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    /// Spin squeezing is undefined when the mean collective spin vanishes.
    #[error("undefined mean-spin direction: |<S>| = {norm:.3e} below threshold {threshold:.3e}")]
    UndefinedDirection { norm: f64, threshold: f64 },

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
