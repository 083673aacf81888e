//! Deterministic discrete-event simulation of asynchronous distributed GP
//! prediction exchange.
//!
//! A coordinator broadcasts queries on a fixed interval; expert nodes poll at
//! their listening frequency, compute predictions with modeled latency, and
//! reply over delayed links. The coordinator manages its bounded information
//! set and aggregates at every broadcast tick. Runs are reproducible: the
//! whole simulation is a pure function of (scenario, seed).

pub mod engine;
pub mod error;
pub mod output;
pub mod sampler;
pub mod scenario;
pub mod stream;

pub use engine::{
    monotone_growth_segments, run_simulation, sorted_delay_view, Metrics, NodeMetrics, RunOutput,
    SetRecordSnap, TickLog,
};
pub use error::{Result, SimError};
pub use sampler::{ComputeModel, DelayDist, DelaySampler};
pub use scenario::{
    ControlSection, Mode, NodeConfig, PretrainAssign, PretrainConfig, PretrainPlacement,
    SampleDispatch, ScenarioConfig,
};
pub use stream::{materialize, KernelExpansion, MaterializedStream, PathSpec, StreamPoint, StreamSource, SyntheticStream};
