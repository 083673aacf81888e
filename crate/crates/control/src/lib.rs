//! Feedback-linearization tracking control on top of aggregated GP
//! predictions, with the spectral tracking-error bound machinery.

pub mod error;
pub mod feed;
pub mod montecarlo;
pub mod output;
pub mod system;
pub mod tracking;

pub use error::{ControlError, Result};
pub use feed::ExpertPool;
pub use montecarlo::{run_monte_carlo, Aggregate, MonteCarloConfig, MonteCarloSummary, RunSummary};
pub use system::{build_error_system, tracking_bound, ultimate_bound, ErrorSystem};
pub use tracking::{simulate_tracking, Feed, SineReference, TrackingConfig, TrackingRun};
