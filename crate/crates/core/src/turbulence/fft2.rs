//! Row/column 2-D FFT on row-major buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized 2-D FFT for an `ny × nx` row-major grid.
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            nx,
            ny,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            scratch: vec![Complex64::default(); scratch_len],
            column: vec![Complex64::default(); ny * nx],
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    /// Inverse transform without the 1/(nx·ny) factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    fn run(&mut self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.nx * self.ny);
        let (fx, fy) = if forward {
            (&self.fwd_x, &self.fwd_y)
        } else {
            (&self.inv_x, &self.inv_y)
        };
        fx.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.column, self.nx, self.ny);
        fy.process_with_scratch(&mut self.column, &mut self.scratch);
        transpose(&self.column, data, self.ny, self.nx);
    }
}

/// `src` is `rows × cols` row-major; `dst` becomes `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Signed FFT frequency index for bin `i` of an `n`-point transform.
#[inline]
pub fn freq_index(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_dft_on_rectangle() {
        let (nx, ny) = (6, 4);
        let data: Vec<Complex64> = (0..nx * ny)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut out = data.clone();
        Fft2::new(nx, ny).forward(&mut out);
        for ky in 0..ny {
            for kx in 0..nx {
                let mut s = Complex64::default();
                for y in 0..ny {
                    for x in 0..nx {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * (kx as f64 * x as f64 / nx as f64 + ky as f64 * y as f64 / ny as f64);
                        s += data[y * nx + x] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((s - out[ky * nx + kx]).norm() < 1e-10);
            }
        }
        let mut back = out;
        Fft2::new(nx, ny).inverse(&mut back);
        for (a, b) in back.iter().zip(&data) {
            assert!((a / (nx * ny) as f64 - b).norm() < 1e-12);
        }
    }
}
