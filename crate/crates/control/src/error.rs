use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid control configuration: {0}")]
    Validation(String),

    #[error("gains are not Hurwitz: eigenvalue {eigenvalue} has non-negative real part")]
    NotHurwitz { eigenvalue: String },

    #[error("error matrix is numerically defective (closest eigenvalue pair {gap:e} apart); perturb the gains")]
    Defective { gap: f64 },

    #[error("eigendecomposition residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigenResidual { residual: f64, tolerance: f64 },

    #[error("state diverged (non-finite) at t = {t}")]
    Diverged { t: f64 },

    #[error(transparent)]
    Core(#[from] asyncgp_core::CoreError),

    #[error(transparent)]
    Sim(#[from] asyncgp_simnet::SimError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ControlError>;
