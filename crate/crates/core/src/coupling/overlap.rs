//! Overlap of the received field with the Gaussian local-oscillator mode.

use num_complex::Complex64;

use super::series::{ChannelFrame, ChannelSeries};
use crate::error::{invalid, Error, Result};
use crate::turbulence::downlink::{pupil_indices, PupilSampled};
use crate::turbulence::ComplexField;

/// LO waist that maximizes coupling of a plane wave into the pupil, D/2.2.
pub fn default_waist(pupil_d: f64) -> f64 {
    pupil_d / 2.2
}

/// Real Gaussian LO exp(−r²/w0²) with unit peak on an `n × n` grid.
pub fn gaussian_lo(n: usize, pitch: f64, wavelength: f64, pupil_d: f64, w0: f64) -> Result<ComplexField> {
    if !(w0 > 0.0 && w0.is_finite()) {
        return invalid(format!("LO waist must be positive, got {w0}"));
    }
    if !(pupil_d > 0.0) {
        return invalid(format!("pupil diameter must be positive, got {pupil_d}"));
    }
    let mut lo = ComplexField::plane_wave(n, pitch, wavelength)?;
    for iy in 0..n {
        let y = lo.coord(iy);
        for ix in 0..n {
            let x = lo.coord(ix);
            lo.data[iy * n + ix] = Complex64::new((-(x * x + y * y) / (w0 * w0)).exp(), 0.0);
        }
    }
    Ok(lo)
}

/// C = Σ_pupil conj(E_LO)·E_RX·pitch².
pub fn complex_coupling(e_rx: &ComplexField, e_lo: &ComplexField, pupil_d: f64) -> Result<Complex64> {
    if !e_rx.same_grid(e_lo) {
        return Err(Error::GridMismatch(format!(
            "received field {}×{} @ {} m vs LO {}×{} @ {} m",
            e_rx.n, e_rx.n, e_rx.pitch_m, e_lo.n, e_lo.n, e_lo.pitch_m
        )));
    }
    let idx = pupil_indices(e_rx.n, e_rx.pitch_m, pupil_d);
    let sum: Complex64 = idx.iter().map(|&i| e_lo.data[i].conj() * e_rx.data[i]).sum();
    Ok(sum * e_rx.pitch_m * e_rx.pitch_m)
}

/// Precomputed LO samples on the pupil pixels of a centred grid, with the
/// turbulence-free reference coupling.
#[derive(Debug, Clone)]
pub struct CouplingModel {
    pub n: usize,
    pub pitch_m: f64,
    pub indices: Vec<usize>,
    lo: Vec<f64>,
    c_ref: Complex64,
}

impl CouplingModel {
    pub fn new(n: usize, pitch: f64, pupil_d: f64, w0: f64) -> Result<Self> {
        if !(w0 > 0.0) {
            return invalid(format!("LO waist must be positive, got {w0}"));
        }
        let indices = pupil_indices(n, pitch, pupil_d);
        if indices.is_empty() {
            return Err(Error::EmptyPupil);
        }
        let c = (n / 2) as f64;
        let lo: Vec<f64> = indices
            .iter()
            .map(|&i| {
                let x = ((i % n) as f64 - c) * pitch;
                let y = ((i / n) as f64 - c) * pitch;
                (-(x * x + y * y) / (w0 * w0)).exp()
            })
            .collect();
        let c_ref = Complex64::new(lo.iter().sum::<f64>() * pitch * pitch, 0.0);
        if c_ref.norm() == 0.0 {
            return Err(Error::ZeroReference);
        }
        Ok(Self {
            n,
            pitch_m: pitch,
            indices,
            lo,
            c_ref,
        })
    }

    pub fn reference(&self) -> Complex64 {
        self.c_ref
    }

    /// C for field values listed on the pupil pixels.
    pub fn coupling_pupil(&self, values: impl IntoIterator<Item = Complex64>) -> Complex64 {
        let sum: Complex64 = self.lo.iter().zip(values).map(|(l, e)| e * l).sum();
        sum * self.pitch_m * self.pitch_m
    }

    /// C for a full `n × n` field.
    pub fn coupling(&self, field: &[Complex64]) -> Complex64 {
        self.coupling_pupil(self.indices.iter().map(|&i| field[i]))
    }

    /// (ρ_rel, φ) of a coupling value.
    pub fn frame(&self, c: Complex64) -> ChannelFrame {
        ChannelFrame {
            rho_rel: c.norm_sqr() / self.c_ref.norm_sqr(),
            phi_rad: c.arg(),
        }
    }
}

/// ρ_rel(k) = |C(k)|²/|C_ref|², φ(k) = arg C(k), with C_ref the coupling of
/// a unit plane wave on the same grid.
pub fn build_channel_series<'a, F, I>(
    fields: I,
    lo: &ComplexField,
    pupil_d: f64,
    frame_rate_hz: f64,
) -> Result<ChannelSeries>
where
    F: PupilSampled + 'a,
    I: IntoIterator<Item = &'a F>,
{
    let idx = pupil_indices(lo.n, lo.pitch_m, pupil_d);
    let pitch2 = lo.pitch_m * lo.pitch_m;
    let c_ref: Complex64 = idx.iter().map(|&i| lo.data[i].conj()).sum::<Complex64>() * pitch2;
    if c_ref.norm() == 0.0 {
        return Err(Error::ZeroReference);
    }
    let mut frames = Vec::new();
    for f in fields {
        if f.grid_n() != lo.n || f.grid_pitch() != lo.pitch_m {
            return Err(Error::GridMismatch("field and LO grids differ".into()));
        }
        let data = f.samples();
        let c: Complex64 = idx.iter().map(|&i| lo.data[i].conj() * data[i]).sum::<Complex64>() * pitch2;
        frames.push(ChannelFrame {
            rho_rel: c.norm_sqr() / c_ref.norm_sqr(),
            phi_rad: c.arg(),
        });
    }
    ChannelSeries::new(frame_rate_hz, frames)
}
