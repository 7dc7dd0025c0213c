use std::io;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no turbulence: integrated Cn2 is zero")]
    NoTurbulence,

    #[error("screen exhausted: shift of {requested:.3} m exceeds the {available:.3} m strip")]
    ScreenExhausted { requested: f64, available: f64 },

    #[error("under-resolved pupil: {pixels:.1} px across, need at least {min}")]
    UnderResolvedPupil { pixels: f64, min: usize },

    #[error("empty pupil: no grid samples inside the aperture")]
    EmptyPupil,

    #[error("singular Gram matrix")]
    SingularGram,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("reference coupling is zero")]
    ZeroReference,

    #[error("sample budget exceeded: {requested} samples > {budget}")]
    SampleBudget { requested: u64, budget: u64 },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
