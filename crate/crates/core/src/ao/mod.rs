//! Zernike modal basis and the adaptive-optics closed loop.

pub mod basis;
pub mod control;
pub mod zernike;

pub use basis::{modal_decompose, modal_reconstruct, ZernikeBasis};
pub use control::{ao_closed_loop, AoLoop, AoLoopConfig};
pub use zernike::{noll_to_nm, zernike_mode, zernike_value};
