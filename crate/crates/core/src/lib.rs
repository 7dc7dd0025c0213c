//! End-to-end simulator of a coherent BPSK satellite-to-ground optical link.
//!
//! The crate is organised along the signal path:
//!
//! - [`turbulence`]: Cn² profile, von Kármán phase screens and split-step
//!   Fresnel propagation of a plane wave down to the receiver pupil.
//! - [`ao`]: Zernike modal basis and a delayed-integrator adaptive-optics loop.
//! - [`coupling`]: overlap of the corrected pupil field with a Gaussian local
//!   oscillator, producing a [`coupling::ChannelSeries`] of (ρ, φ).
//! - [`dsp`]: symbol-rate intradyne receiver (AGC, DPLL, BPSK detection with
//!   differential decoding) and closed-form bounds.
//! - [`lab`]: configuration, experiment runners, metrics and acceptance checks.
//!
//! Library modules never touch the filesystem except through the explicit
//! reader/writer helpers; the CLI owns all I/O.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod coupling;
pub mod dsp;
pub mod error;
pub mod lab;
pub mod math;
pub mod turbulence;

pub use error::{Error, Result};
