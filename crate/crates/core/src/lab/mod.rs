//! Experiment orchestration: configuration, runners, metrics and acceptance checks.

pub mod channel;
pub mod config;
pub mod metrics;
pub mod receiver;
pub mod stats;
pub mod sweep;
pub mod validate;

pub use channel::{constant_channel, simulate_channel, ChannelRun, ScenarioConfig};
pub use config::{ExperimentConfig, LinkConfig, OutputConfig};
pub use metrics::{Acquisition, BerEstimate, MetricsReport, Predicted};
pub use receiver::{run_link, LockConfig, ReceiverConfig, RunOptions};
pub use stats::phase_error_stats;
pub use sweep::{sweep_snr, write_sweep_csv, SweepRow};

pub use validate::{run_all, CriterionReport};
