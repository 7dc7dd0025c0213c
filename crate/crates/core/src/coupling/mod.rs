//! Received-field to local-oscillator coupling and the resulting channel series.

pub mod overlap;
pub mod series;

pub use overlap::{build_channel_series, complex_coupling, default_waist, gaussian_lo, CouplingModel};
pub use series::{ChannelFrame, ChannelSeries, SeriesStats};
