use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::encoding::DifferentialEncoder;
use crate::coupling::ChannelSeries;
use crate::error::{invalid, Result};
use crate::math::{db_to_linear, wrap_2pi};

/// How the channel is evaluated between AO frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseInterpolation {
    /// ρ and φ held for the whole frame.
    Hold,
    /// ρ and (unwrapped) φ interpolated linearly from one frame to the next.
    #[default]
    Linear,
}

/// Parameters of the intradyne sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    pub symbol_rate_hz: f64,
    pub delta_f_hz: f64,
    /// Series-average E_s/N₀ in dB; `f64::INFINITY` disables noise.
    pub esn0_avg_db: f64,
    /// Symbols per channel frame. `None` uses symbol_rate / frame_rate.
    pub symbols_per_frame: Option<u64>,
    pub interpolation: PhaseInterpolation,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            symbol_rate_hz: 1e10,
            delta_f_hz: 1e8,
            esn0_avg_db: 8.0,
            symbols_per_frame: None,
            interpolation: PhaseInterpolation::Linear,
        }
    }
}

/// Where transmitted bits come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BitSource {
    /// Uniform i.i.d. bits from the stream's own generator.
    Random,
    /// Explicit bits, repeated cyclically.
    Fixed(Vec<u8>),
}

/// One symbol-spaced receiver sample with its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqSample {
    pub index: u64,
    pub sample: Complex64,
    /// Δω·kT + φ(k), wrapped to (−π, π]; excludes the data phase.
    pub true_phase: f64,
    pub true_rho: f64,
    pub tx_bit: u8,
}

/// Endless stream of received samples
/// s(k) = √E_s(k)·exp(i(2πΔf·kT + φ_m(k) + φ(k))) + n(k), with
/// E_s(k) = ρ_rel(k)/⟨ρ_rel⟩ (E_s averaged over the series is 1) and complex
/// white Gaussian noise of total variance N₀ = 1/(E_s/N₀).
#[derive(Debug, Clone)]
pub struct SampleStream {
    amp: Vec<f64>,
    phase: Vec<f64>,
    /// φ increment from frame i to i+1 (continuous across the wrap).
    dphase: Vec<f64>,
    samples_per_frame: u64,
    interpolation: PhaseInterpolation,
    carrier_cycles_per_sample: f64,
    noise_std: f64,
    rng: ChaCha8Rng,
    bits: BitSource,
    bit_buf: u64,
    bit_left: u32,
    encoder: DifferentialEncoder,
    k: u64,
}

impl SampleStream {
    pub fn new(series: &ChannelSeries, params: &LinkParams, bits: BitSource, seed: u64) -> Result<Self> {
        if series.is_empty() {
            return invalid("empty channel series");
        }
        if !(params.symbol_rate_hz > 0.0) {
            return invalid(format!("symbol rate must be positive, got {}", params.symbol_rate_hz));
        }
        if params.symbol_rate_hz < series.frame_rate_hz {
            return invalid("symbol rate must not be below the channel frame rate");
        }
        if params.delta_f_hz.abs() >= params.symbol_rate_hz / 2.0 {
            return invalid("frequency offset must stay below half the symbol rate");
        }
        if let BitSource::Fixed(b) = &bits {
            if b.is_empty() {
                return invalid("fixed bit source is empty");
            }
        }
        let samples_per_frame = match params.symbols_per_frame {
            Some(0) => return invalid("symbols_per_frame must be positive"),
            Some(n) => n,
            None => (params.symbol_rate_hz / series.frame_rate_hz).round() as u64,
        };
        let mean_rho = series.mean_rho();
        let amp: Vec<f64> = if mean_rho > 0.0 {
            series.frames.iter().map(|f| (f.rho_rel / mean_rho).sqrt()).collect()
        } else {
            vec![0.0; series.len()]
        };
        let phase: Vec<f64> = series.frames.iter().map(|f| f.phi_rad).collect();
        let n = phase.len();
        let dphase = (0..n).map(|i| wrap_2pi(phase[(i + 1) % n] - phase[i])).collect();
        let x = db_to_linear(params.esn0_avg_db);
        let noise_std = if x.is_finite() { (0.5 / x).sqrt() } else { 0.0 };
        Ok(Self {
            amp,
            phase,
            dphase,
            samples_per_frame,
            interpolation: params.interpolation,
            carrier_cycles_per_sample: params.delta_f_hz / params.symbol_rate_hz,
            noise_std,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bits,
            bit_buf: 0,
            bit_left: 0,
            encoder: DifferentialEncoder::default(),
            k: 0,
        })
    }

    pub fn samples_per_frame(&self) -> u64 {
        self.samples_per_frame
    }

    /// Number of samples spanning the whole series once.
    pub fn series_span(&self) -> u64 {
        self.samples_per_frame * self.amp.len() as u64
    }

    fn next_bit(&mut self) -> u8 {
        match &self.bits {
            BitSource::Random => {
                if self.bit_left == 0 {
                    self.bit_buf = self.rng.next_u64();
                    self.bit_left = 64;
                }
                let b = (self.bit_buf & 1) as u8;
                self.bit_buf >>= 1;
                self.bit_left -= 1;
                b
            }
            BitSource::Fixed(v) => v[(self.k % v.len() as u64) as usize] & 1,
        }
    }

    fn channel_at(&self, k: u64) -> (f64, f64) {
        let n = self.amp.len() as u64;
        let frame = (k / self.samples_per_frame) % n;
        let i = frame as usize;
        match self.interpolation {
            PhaseInterpolation::Hold => (self.amp[i], self.phase[i]),
            PhaseInterpolation::Linear => {
                let frac = (k % self.samples_per_frame) as f64 / self.samples_per_frame as f64;
                let j = ((frame + 1) % n) as usize;
                let a = self.amp[i] + (self.amp[j] - self.amp[i]) * frac;
                (a, self.phase[i] + self.dphase[i] * frac)
            }
        }
    }
}

impl Iterator for SampleStream {
    type Item = IqSample;

    #[inline]
    fn next(&mut self) -> Option<IqSample> {
        let k = self.k;
        let (amp, phi) = self.channel_at(k);
        let carrier = 2.0 * PI * (self.carrier_cycles_per_sample * k as f64).fract();
        let true_phase = wrap_2pi(carrier + phi);
        let bit = self.next_bit();
        let d = self.encoder.encode(bit);
        let mut sample = Complex64::from_polar(amp, true_phase);
        if d == 1 {
            sample = -sample;
        }
        if self.noise_std > 0.0 {
            let nr: f64 = self.rng.sample(StandardNormal);
            let ni: f64 = self.rng.sample(StandardNormal);
            sample += Complex64::new(nr, ni) * self.noise_std;
        }
        self.k += 1;
        Some(IqSample {
            index: k,
            sample,
            true_phase,
            true_rho: amp * amp,
            tx_bit: bit,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::ChannelFrame;

    fn flat() -> ChannelSeries {
        ChannelSeries::constant(5e3, 4, 1.0, 0.0).unwrap()
    }

    #[test]
    fn noiseless_constant_sample() {
        let p = LinkParams {
            delta_f_hz: 0.0,
            esn0_avg_db: f64::INFINITY,
            ..Default::default()
        };
        let s = SampleStream::new(&flat(), &p, BitSource::Fixed(vec![0]), 1).unwrap();
        for x in s.take(100) {
            assert_eq!(x.sample, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn carrier_advances_by_two_pi_df_t() {
        let p = LinkParams {
            esn0_avg_db: f64::INFINITY,
            ..Default::default()
        };
        let s = SampleStream::new(&flat(), &p, BitSource::Fixed(vec![0]), 1).unwrap();
        let v: Vec<_> = s.take(3).collect();
        let step = wrap_2pi(v[1].sample.arg() - v[0].sample.arg());
        assert!((step - 0.062_831_853).abs() < 1e-8, "{step}");
        assert!((wrap_2pi(v[2].true_phase - v[1].true_phase) - step).abs() < 1e-12);
    }

    #[test]
    fn mean_symbol_energy_matches_average() {
        let frames: Vec<_> = (0..100)
            .map(|k| ChannelFrame {
                rho_rel: 0.05 + 0.5 * ((k as f64) * 0.37).sin().powi(2),
                phi_rad: 0.0,
            })
            .collect();
        let series = ChannelSeries::new(5e3, frames).unwrap();
        let p = LinkParams {
            esn0_avg_db: f64::INFINITY,
            symbols_per_frame: Some(10_000),
            interpolation: PhaseInterpolation::Hold,
            ..Default::default()
        };
        let s = SampleStream::new(&series, &p, BitSource::Random, 3).unwrap();
        let n = s.series_span() as usize;
        let e = s.take(n).map(|x| x.sample.norm_sqr()).sum::<f64>() / n as f64;
        assert!((e - 1.0).abs() < 1e-2, "{e}");
    }

    #[test]
    fn noise_power_matches_n0() {
        let p = LinkParams {
            delta_f_hz: 0.0,
            esn0_avg_db: 3.0,
            ..Default::default()
        };
        let s = SampleStream::new(&flat(), &p, BitSource::Fixed(vec![0]), 9).unwrap();
        let n = 200_000;
        let pn = s.take(n).map(|x| (x.sample - 1.0).norm_sqr()).sum::<f64>() / n as f64;
        assert!((pn - 1.0 / db_to_linear(3.0)).abs() < 0.01, "{pn}");
    }

    #[test]
    fn validates_arguments() {
        let empty = ChannelSeries::new(5e3, vec![]).unwrap();
        assert!(SampleStream::new(&empty, &LinkParams::default(), BitSource::Random, 0).is_err());
        let p = LinkParams {
            symbol_rate_hz: -1.0,
            ..Default::default()
        };
        assert!(SampleStream::new(&flat(), &p, BitSource::Random, 0).is_err());
        let p = LinkParams {
            delta_f_hz: 6e9,
            ..Default::default()
        };
        assert!(SampleStream::new(&flat(), &p, BitSource::Random, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let p = LinkParams::default();
        let a: Vec<_> = SampleStream::new(&flat(), &p, BitSource::Random, 5)
            .unwrap()
            .take(1000)
            .collect();
        let b: Vec<_> = SampleStream::new(&flat(), &p, BitSource::Random, 5)
            .unwrap()
            .take(1000)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_interpolation_is_continuous_across_wrap() {
        let frames = vec![
            ChannelFrame {
                rho_rel: 1.0,
                phi_rad: 3.0,
            },
            ChannelFrame {
                rho_rel: 1.0,
                phi_rad: -3.0,
            },
        ];
        let series = ChannelSeries::new(5e3, frames).unwrap();
        let p = LinkParams {
            delta_f_hz: 0.0,
            esn0_avg_db: f64::INFINITY,
            symbols_per_frame: Some(100),
            ..Default::default()
        };
        let v: Vec<_> = SampleStream::new(&series, &p, BitSource::Fixed(vec![0]), 0)
            .unwrap()
            .take(200)
            .collect();
        for w in v.windows(2) {
            assert!(wrap_2pi(w[1].true_phase - w[0].true_phase).abs() < 0.01);
        }
    }
}
