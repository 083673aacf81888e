//! Asynchronous distributed Gaussian-process regression.
//!
//! A coordinator fuses predictions from M distributed GP experts whose
//! replies arrive late: each retained prediction record gets a deterministic
//! delayed error bound η_i^k(t) built from a kernel Lipschitz constant and
//! the expert's posterior confidence, and the fused prediction carries its
//! own bound ω(t) that never exceeds the prior bound βσ_f.
//!
//! Module map:
//! - [`kernel`]: the five kernel families and their scalar distance functions;
//! - [`lipschitz`]: closed-form kernel Lipschitz constants plus a numerical
//!   maximization oracle that validates them;
//! - [`gp`]: per-expert online GP regression over a capped FIFO buffer;
//! - [`aggregate`]: delayed error bounds, information-set management, the
//!   confidence-weighted AsyncDGP aggregator and five baseline aggregators.

pub mod aggregate;
pub mod chol;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod lipschitz;

pub use aggregate::{
    aggregate_error_bound, asyncdgp_aggregate, baseline_aggregate, delayed_error_bound,
    manage_information_set, AggregationResult, AggregatorKind, InformationSet, PredictionRecord,
    ResponsibilityRule, WeightEntry,
};
pub use error::{CoreError, Result};
pub use gp::{error_bound, GPConfig, GPState, Posterior, TrainingBuffer};
pub use kernel::{KernelFamily, KernelSpec};
pub use lipschitz::{
    default_d_max, f_lipschitz, lipschitz_closed_form, lipschitz_oracle, rq_corrected_lipschitz,
    rq_critical_distance, rq_table_lipschitz, LipschitzReport,
};
