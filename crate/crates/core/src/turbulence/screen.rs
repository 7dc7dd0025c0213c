//! Von Kármán phase screens by FFT synthesis with subharmonic compensation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fft2::{freq_index, Fft2};
use crate::error::{invalid, Result};
use crate::math::{gauss_legendre, is_power_of_two};

const SUBHARMONIC_LEVELS: u32 = 3;

/// Real phase map (rad) on an `nx × ny` row-major grid. Square screens have
/// `nx == ny`; frozen-flow strips are elongated along x.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub nx: usize,
    pub ny: usize,
    pub pitch_m: f64,
    pub r0_layer_m: f64,
    pub outer_scale_m: f64,
    pub data: Vec<f32>,
}

impl PhaseScreen {
    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.nx + ix] as f64
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Bilinear sample of an `n × n` window whose corner sits at fractional
    /// pixel offset (`ox`, `oy`), written into `out`.
    pub fn window_into(&self, ox: f64, oy: f64, n: usize, out: &mut [f64]) -> bool {
        let (x0, y0) = (ox.floor(), oy.floor());
        if x0 < 0.0 || y0 < 0.0 {
            return false;
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        if x0 + n + 1 > self.nx || y0 + n + 1 > self.ny {
            return false;
        }
        let (fx, fy) = ((ox - x0 as f64) as f32, (oy - y0 as f64) as f32);
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        for iy in 0..n {
            let r0 = &self.data[(y0 + iy) * self.nx + x0..];
            let r1 = &self.data[(y0 + iy + 1) * self.nx + x0..];
            let row = &mut out[iy * n..(iy + 1) * n];
            for ix in 0..n {
                row[ix] = (w00 * r0[ix] + w10 * r0[ix + 1] + w01 * r1[ix] + w11 * r1[ix + 1]) as f64;
            }
        }
        true
    }
}

/// Von Kármán phase PSD in cycles/m: 0.023·r₀^(−5/3)·(f² + 1/L₀²)^(−11/6).
#[inline]
pub fn von_karman_psd(f2: f64, r0: f64, l0: f64) -> f64 {
    0.023 * r0.powf(-5.0 / 3.0) * (f2 + 1.0 / (l0 * l0)).powf(-11.0 / 6.0)
}

/// ∫∫ PSD over the `sx × sy` frequency cell centred on (`fx`, `fy`).
fn cell_power(fx: f64, fy: f64, sx: f64, sy: f64, r0: f64, l0: f64) -> f64 {
    let inner = |u: f64| {
        gauss_legendre(
            |v| von_karman_psd(u * u + v * v, r0, l0),
            fy - 0.5 * sy,
            fy + 0.5 * sy,
            1,
        )
    };
    gauss_legendre(inner, fx - 0.5 * sx, fx + 0.5 * sx, 1)
}

/// Square `n × n` screen.
pub fn make_phase_screen(r0_layer: f64, l0: f64, n: usize, pitch: f64, seed: u64) -> Result<PhaseScreen> {
    make_phase_strip(r0_layer, l0, n, n, pitch, seed)
}

/// Rectangular screen; both sides must be powers of two.
pub fn make_phase_strip(r0_layer: f64, l0: f64, nx: usize, ny: usize, pitch: f64, seed: u64) -> Result<PhaseScreen> {
    if !is_power_of_two(nx) || !is_power_of_two(ny) {
        return invalid(format!("screen sides must be powers of two, got {nx}×{ny}"));
    }
    if !(pitch > 0.0 && pitch.is_finite()) {
        return invalid(format!("pitch must be positive, got {pitch}"));
    }
    if !(r0_layer > 0.0) {
        return invalid(format!("layer r0 must be positive, got {r0_layer}"));
    }
    if !(l0 > 0.0) {
        return invalid(format!("outer scale must be positive, got {l0}"));
    }
    let mut screen = PhaseScreen {
        nx,
        ny,
        pitch_m: pitch,
        r0_layer_m: r0_layer,
        outer_scale_m: l0,
        data: vec![0.0; nx * ny],
    };
    if r0_layer.is_infinite() {
        return Ok(screen);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    let (dfx, dfy) = (1.0 / (nx as f64 * pitch), 1.0 / (ny as f64 * pitch));
    let cell = (dfx * dfy).sqrt();
    let mut spec = vec![Complex64::default(); nx * ny];
    for iy in 0..ny {
        let fy = freq_index(iy, ny) * dfy;
        for ix in 0..nx {
            if ix == 0 && iy == 0 {
                continue;
            }
            let fx = freq_index(ix, nx) * dfx;
            let amp = von_karman_psd(fx * fx + fy * fy, r0_layer, l0).sqrt() * cell;
            spec[iy * nx + ix] = Complex64::new(gauss(), gauss()) * amp;
        }
    }
    Fft2::new(nx, ny).inverse(&mut spec);

    // Subharmonics: 3×3 lattices of cells of side Δf/3^p around DC, each
    // weighted by the PSD integrated over its cell.
    let mut sub = Vec::new();
    for p in 1..=SUBHARMONIC_LEVELS {
        let s = 3f64.powi(p as i32);
        let (sx, sy) = (dfx / s, dfy / s);
        for j in -1i32..=1 {
            for i in -1i32..=1 {
                if i == 0 && j == 0 {
                    continue;
                }
                let (fx, fy) = (i as f64 * sx, j as f64 * sy);
                let power = cell_power(fx, fy, sx, sy, r0_layer, l0);
                sub.push((fx, fy, Complex64::new(gauss(), gauss()) * power.sqrt()));
            }
        }
    }
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * pitch).collect();
    let mut low = vec![0.0; nx * ny];
    for &(fx, fy, c) in &sub {
        let ex: Vec<Complex64> = xs
            .iter()
            .map(|&x| Complex64::from_polar(1.0, 2.0 * PI * fx * x))
            .collect();
        for iy in 0..ny {
            let ey = c * Complex64::from_polar(1.0, 2.0 * PI * fy * iy as f64 * pitch);
            let row = &mut low[iy * nx..(iy + 1) * nx];
            for (v, e) in row.iter_mut().zip(&ex) {
                *v += (ey * e).re;
            }
        }
    }
    let mean_low = low.iter().sum::<f64>() / low.len() as f64;

    for ((d, s), l) in screen.data.iter_mut().zip(&spec).zip(&low) {
        *d = (s.re + l - mean_low) as f32;
    }
    Ok(screen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let a = make_phase_screen(0.1, 5.0, 64, 0.01, 7).unwrap();
        let b = make_phase_screen(0.1, 5.0, 64, 0.01, 7).unwrap();
        let c = make_phase_screen(0.1, 5.0, 64, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn infinite_r0_gives_zero_screen() {
        let s = make_phase_screen(f64::INFINITY, 5.0, 32, 0.01, 1).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(make_phase_screen(0.1, 5.0, 100, 0.01, 1).is_err());
        assert!(make_phase_strip(0.1, 5.0, 64, 48, 0.01, 1).is_err());
        assert!(make_phase_screen(0.0, 5.0, 64, 0.01, 1).is_err());
    }

    #[test]
    fn window_interpolates_between_pixels() {
        let mut s = make_phase_screen(f64::INFINITY, 5.0, 8, 1.0, 0).unwrap();
        for iy in 0..8 {
            for ix in 0..8 {
                s.data[iy * 8 + ix] = (ix + 10 * iy) as f32;
            }
        }
        let mut out = vec![0.0; 4];
        assert!(s.window_into(1.25, 2.5, 2, &mut out));
        assert!((out[0] - (1.25 + 25.0)).abs() < 1e-5);
        assert!((out[3] - (2.25 + 35.0)).abs() < 1e-5);
        assert!(!s.window_into(6.5, 0.0, 2, &mut out));
    }
}
