use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use rustfft::{Fft, FftPlanner};

use super::fft2::freq_index;
use crate::error::{invalid, Error, Result};
use crate::math::is_power_of_two;

const FSOF_MAGIC: &[u8; 4] = b"FSOF";
const FSOF_VERSION: u32 = 1;

/// Sampled complex optical field on an `n × n` grid, row-major, origin at
/// the grid centre (pixel n/2).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub n: usize,
    pub pitch_m: f64,
    pub wavelength_m: f64,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(n: usize, pitch_m: f64, wavelength_m: f64, data: Vec<Complex64>) -> Result<Self> {
        if !is_power_of_two(n) {
            return invalid(format!("grid size must be a power of two, got {n}"));
        }
        if !(pitch_m > 0.0 && wavelength_m > 0.0) {
            return invalid("pitch and wavelength must be positive");
        }
        if data.len() != n * n {
            return invalid(format!("expected {} samples, got {}", n * n, data.len()));
        }
        Ok(Self {
            n,
            pitch_m,
            wavelength_m,
            data,
        })
    }

    /// Unit-amplitude plane wave.
    pub fn plane_wave(n: usize, pitch_m: f64, wavelength_m: f64) -> Result<Self> {
        Self::new(n, pitch_m, wavelength_m, vec![Complex64::new(1.0, 0.0); n * n])
    }

    /// Physical coordinate of pixel index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch_m
    }

    /// Σ|E|²·pitch².
    pub fn power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.pitch_m * self.pitch_m
    }

    pub fn same_grid(&self, other: &ComplexField) -> bool {
        self.n == other.n && self.pitch_m == other.pitch_m
    }

    pub fn write_fsof<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FSOF_MAGIC)?;
        w.write_all(&FSOF_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.pitch_m.to_le_bytes())?;
        w.write_all(&self.wavelength_m.to_le_bytes())?;
        for c in &self.data {
            let c = Complex32::new(c.re as f32, c.im as f32);
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_fsof<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FSOF_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected FSOF")));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FSOF_VERSION {
            return Err(Error::Format(format!("unsupported FSOF version {version}")));
        }
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let pitch = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let wavelength = f64::from_le_bytes(b8);
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut b4)?;
            let re = f32::from_le_bytes(b4);
            r.read_exact(&mut b4)?;
            let im = f32::from_le_bytes(b4);
            data.push(Complex64::new(re as f64, im as f64));
        }
        Self::new(n, pitch, wavelength, data)
    }
}

/// Fresnel propagator on a square grid, reusable across calls. The spectrum
/// is handled in transposed order, which is harmless because the transfer
/// function depends only on f_x² + f_y².
pub struct Propagator {
    n: usize,
    wavelength: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// f_x² + f_y² per bin.
    f2: Vec<f64>,
}

impl Propagator {
    pub fn new(n: usize, pitch: f64, wavelength: f64) -> Self {
        let df = 1.0 / (n as f64 * pitch);
        let mut f2 = Vec::with_capacity(n * n);
        for iy in 0..n {
            let fy = freq_index(iy, n) * df;
            for ix in 0..n {
                let fx = freq_index(ix, n) * df;
                f2.push(fx * fx + fy * fy);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            n,
            wavelength,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            f2,
        }
    }

    /// Transfer function for `distance`, with the inverse-FFT scale folded in.
    pub fn transfer(&self, distance: f64) -> Vec<Complex64> {
        let a = -PI * self.wavelength * distance;
        let norm = 1.0 / self.f2.len() as f64;
        self.f2
            .iter()
            .map(|&f2| {
                let (s, c) = (a * f2).sin_cos();
                Complex64::new(c * norm, s * norm)
            })
            .collect()
    }

    /// Propagates `data` in place over `distance` (m); negative distances
    /// propagate backwards.
    pub fn propagate(&mut self, data: &mut [Complex64], distance: f64) {
        if distance == 0.0 {
            return;
        }
        let h = self.transfer(distance);
        self.apply(data, &h);
    }

    /// Propagates with a precomputed transfer function from [`Self::transfer`].
    pub fn apply(&mut self, data: &mut [Complex64], transfer: &[Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        assert_eq!(transfer.len(), data.len());
        self.fwd.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, self.n);
        self.fwd.process_with_scratch(data, &mut self.scratch);
        for (c, h) in data.iter_mut().zip(transfer) {
            *c *= h;
        }
        self.inv.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, self.n);
        self.inv.process_with_scratch(data, &mut self.scratch);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for rb in (0..n).step_by(B) {
        for cb in (rb..n).step_by(B) {
            for r in rb..(rb + B).min(n) {
                let c0 = if cb == rb { r + 1 } else { cb };
                for c in c0..(cb + B).min(n) {
                    data.swap(r * n + c, c * n + r);
                }
            }
        }
    }
}

/// Fresnel number of the transfer-function sampling, λ|z|/(N·δ²).
pub fn sampling_ratio(n: usize, pitch: f64, wavelength: f64, distance: f64) -> f64 {
    wavelength * distance.abs() / (n as f64 * pitch * pitch)
}

pub(crate) fn warn_if_aliased(n: usize, pitch: f64, wavelength: f64, distance: f64) {
    let ratio = sampling_ratio(n, pitch, wavelength, distance);
    if ratio > 1.0 {
        log::warn!("Fresnel transfer function undersampled: λz/(N·δ²) = {ratio:.2} > 1");
    }
}

/// Free-space propagation of `field` over `distance_m` with the Fresnel
/// transfer function exp(−iπλz(f_x² + f_y²)). Unitary; z = 0 is the identity.
pub fn angular_spectrum_propagate(field: &ComplexField, distance_m: f64) -> Result<ComplexField> {
    if !distance_m.is_finite() {
        return invalid("propagation distance must be finite");
    }
    let mut out = field.clone();
    warn_if_aliased(field.n, field.pitch_m, field.wavelength_m, distance_m);
    if distance_m != 0.0 {
        Propagator::new(field.n, field.pitch_m, field.wavelength_m).propagate(&mut out.data, distance_m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_beam(n: usize, pitch: f64) -> ComplexField {
        let mut f = ComplexField::plane_wave(n, pitch, 1.55e-6).unwrap();
        let w = 8.0 * pitch;
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (f.coord(ix), f.coord(iy));
                let r2 = x * x + y * y;
                f.data[iy * n + ix] = Complex64::from_polar((-r2 / (w * w)).exp(), 3.0 * x / (n as f64 * pitch));
            }
        }
        f
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = gaussian_beam(64, 1e-3);
        let g = angular_spectrum_propagate(&f, 0.0).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn forward_then_back_restores_field() {
        let f = gaussian_beam(64, 1e-3);
        let g = angular_spectrum_propagate(&f, 50.0).unwrap();
        assert!(((g.power() - f.power()) / f.power()).abs() < 1e-10);
        let h = angular_spectrum_propagate(&g, -50.0).unwrap();
        let rms =
            (f.data.iter().zip(&h.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / f.data.len() as f64).sqrt();
        assert!(rms < 1e-9, "{rms}");
    }

    #[test]
    fn plane_wave_stays_flat() {
        let f = ComplexField::plane_wave(32, 5e-3, 1.55e-6).unwrap();
        let g = angular_spectrum_propagate(&f, 1e4).unwrap();
        for c in &g.data {
            assert!((c.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(ComplexField::plane_wave(48, 1e-3, 1e-6).is_err());
    }

    #[test]
    fn fsof_round_trip() {
        let f = gaussian_beam(16, 1e-3);
        let mut buf = Vec::new();
        f.write_fsof(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 16 * 16 * 8);
        let g = ComplexField::read_fsof(buf.as_slice()).unwrap();
        assert_eq!(g.n, 16);
        for (a, b) in f.data.iter().zip(&g.data) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}
