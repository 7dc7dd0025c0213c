//! Turbulent atmosphere and split-step propagation down to the receiver pupil.

pub mod downlink;
pub mod fft2;
pub mod field;
pub mod profile;
pub mod screen;

pub use downlink::{
    propagate_downlink, scintillation_index_empirical, DownlinkConfig, GridConfig, PupilFrame, ScreenBank,
};
pub use field::{angular_spectrum_propagate, ComplexField};
pub use profile::{
    bufton_wind, fried_parameter, hv_cn2, rytov_index, Cn2Profile, Layer, LayerPlacement, TurbulenceParams,
};
pub use screen::{make_phase_screen, PhaseScreen};
