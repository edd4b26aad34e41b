use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("operation requires a clock model (u_ij depending only on the cyclic distance)")]
    NotClock,

    #[error("resource guard exceeded: {what} needs {needed}, limit is {limit}")]
    Guard {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("vertex {0} is outside the volume")]
    OutsideVolume(String),

    #[error("window is missing a spin at vertex {0}")]
    MissingSpin(String),

    #[error(
        "Jacobian singular along the homotopy at t = {t:.4}; nearest eigenvalue of Q0 to 1/d differs by {eigen_gap:.3e}"
    )]
    SingularJacobian { t: f64, eigen_gap: f64 },

    #[error("Newton iteration did not converge at t = {t:.4} (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence {
        t: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("not a contour: label equals the reference at vertex {0}")]
    NotAContour(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::NotClock
            | Error::OutsideVolume(_)
            | Error::MissingSpin(_)
            | Error::NotAContour(_) => 2,
            Error::Guard { .. } => 3,
            Error::SingularJacobian { .. } | Error::NoConvergence { .. } => 4,
        }
    }
}
