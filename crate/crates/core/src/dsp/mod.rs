//! Symbol-rate intradyne receiver: sample synthesis, AGC, DPLL, detection.

pub mod agc;
pub mod bounds;
pub mod dpll;
pub mod encoding;
pub mod synth;

pub use agc::AgcState;
pub use bounds::{debpsk_ber_theory, loop_variance_bounds, pull_in_time, VarianceBounds};
pub use dpll::{Dpll, DpllOutput, DpllState, LockDetector, LoopGains, PhaseDetector};
pub use encoding::{detect_bits, differential_decode, differential_encode, DifferentialDecoder, DifferentialEncoder};
pub use synth::{BitSource, IqSample, LinkParams, PhaseInterpolation, SampleStream};
