//! Turbulence → AO → coupling pipeline producing channel series.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ao::{AoLoop, AoLoopConfig, ZernikeBasis};
use crate::coupling::{ChannelFrame, ChannelSeries, CouplingModel};
use crate::error::{invalid, Error, Result};
use crate::turbulence::downlink::pupil_indices;
use crate::turbulence::{fried_parameter, rytov_index, Cn2Profile, DownlinkConfig, ScreenBank, TurbulenceParams};

/// Physical scenario: atmosphere, optics and AO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub turbulence: TurbulenceParams,
    pub optics: DownlinkConfig,
    pub ao: AoLoopConfig,
    /// LO waist as a fraction of the aperture, w0 = D / ratio.
    pub lo_waist_ratio: f64,
    pub duration_s: f64,
    /// AO frames run before recording starts, so the series begins with a
    /// converged loop.
    pub ao_warmup_frames: usize,
    /// Scale applied to every layer's Cn²; 0 gives a turbulence-free channel.
    pub turbulence_scale: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            turbulence: TurbulenceParams::default(),
            optics: DownlinkConfig::default(),
            ao: AoLoopConfig::default(),
            lo_waist_ratio: 2.2,
            duration_s: 0.2,
            ao_warmup_frames: 20,
            turbulence_scale: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.optics.frame_rate_hz).round() as usize
    }

    pub fn profile(&self) -> Result<Cn2Profile> {
        let mut p = Cn2Profile::hufnagel_valley(&self.turbulence)?;
        if !(self.turbulence_scale >= 0.0 && self.turbulence_scale.is_finite()) {
            return invalid("turbulence scale must be nonnegative");
        }
        for l in &mut p.layers {
            l.cn2 *= self.turbulence_scale;
        }
        Ok(p)
    }
}

/// Channel series with and without AO plus the physics summary of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRun {
    pub with_ao: ChannelSeries,
    pub without_ao: ChannelSeries,
    /// Pupil-plane σ_I² over all frames.
    pub scintillation_index: f64,
    /// Formula values; `None` when the profile carries no turbulence.
    pub fried_parameter_m: Option<f64>,
    pub rytov_index: f64,
}

const CHUNK: usize = 32;

/// Generates the channel for `seed`. Frames are propagated in parallel
/// chunks and fed to the sequential AO loop in order.
pub fn simulate_channel(cfg: &ScenarioConfig, seed: u64) -> Result<ChannelRun> {
    let n_frames = cfg.n_frames();
    if n_frames < cfg.ao.delay_frames.max(2) {
        return invalid(format!("{n_frames} frames is too short for a channel run"));
    }
    if !(cfg.lo_waist_ratio > 0.0) {
        return invalid("LO waist ratio must be positive");
    }
    if (cfg.ao.frame_rate_hz - cfg.optics.frame_rate_hz).abs() > 1e-9 * cfg.optics.frame_rate_hz {
        return invalid("AO and optics frame rates differ");
    }
    let profile = cfg.profile()?;
    let optics = &cfg.optics;
    let el = optics.elevation_rad;
    let r0 = match fried_parameter(&profile, optics.wavelength_m, el) {
        Ok(v) => Some(v),
        Err(Error::NoTurbulence) => None,
        Err(e) => return Err(e),
    };
    let rytov = rytov_index(&profile, optics.wavelength_m, el)?;

    let warmup = cfg.ao_warmup_frames;
    let total = n_frames + warmup;
    let duration = (total - 1) as f64 / optics.frame_rate_hz;
    let bank = ScreenBank::build(&profile, optics, duration, seed)?;
    log::info!(
        "screen bank: {} layers, {:.0} MB",
        profile.layers.len(),
        bank.screen_bytes() as f64 / 1e6
    );

    let first = bank.pupil_frame(0.0)?;
    let (m, pitch) = (first.n, first.pitch_m);
    let basis = ZernikeBasis::new(cfg.ao.n_modes, m, pitch, optics.pupil_d_m)?;
    let model = CouplingModel::new(m, pitch, optics.pupil_d_m, optics.pupil_d_m / cfg.lo_waist_ratio)?;
    debug_assert_eq!(basis.indices, pupil_indices(m, pitch, optics.pupil_d_m));
    let mut ao = AoLoop::new(&basis, cfg.ao.clone())?;

    let mut with_ao = Vec::with_capacity(n_frames);
    let mut without_ao = Vec::with_capacity(n_frames);
    let (mut s1, mut s2, mut count) = (0.0, 0.0, 0usize);
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        for (k, frame) in (start..end).zip(bank.pupil_frames_range(start, end)?) {
            if k < warmup {
                let phase: Vec<f64> = model.indices.iter().map(|&i| frame.phase[i]).collect();
                ao.step_pupil(&phase)?;
                continue;
            }
            let field: Vec<Complex64> = model.indices.iter().map(|&i| frame.field[i]).collect();
            let phase: Vec<f64> = model.indices.iter().map(|&i| frame.phase[i]).collect();
            for e in &field {
                let v = e.norm_sqr();
                s1 += v;
                s2 += v * v;
            }
            count += field.len();
            let correction = ao.step_pupil(&phase)?;
            let c_raw = model.coupling_pupil(field.iter().copied());
            let c_ao = model.coupling_pupil(
                field
                    .iter()
                    .zip(&correction)
                    .map(|(e, c)| e * Complex64::from_polar(1.0, -c)),
            );
            without_ao.push(model.frame(c_raw));
            with_ao.push(model.frame(c_ao));
        }
        start = end;
    }
    let mean = s1 / count as f64;
    Ok(ChannelRun {
        with_ao: ChannelSeries::new(optics.frame_rate_hz, with_ao)?,
        without_ao: ChannelSeries::new(optics.frame_rate_hz, without_ao)?,
        scintillation_index: s2 / count as f64 / (mean * mean) - 1.0,
        fried_parameter_m: r0,
        rytov_index: rytov,
    })
}

/// Constant channel (ρ = 1, φ = 0) at the AO frame rate.
pub fn constant_channel(frame_rate_hz: f64, n_frames: usize) -> Result<ChannelSeries> {
    ChannelSeries::new(
        frame_rate_hz,
        vec![
            ChannelFrame {
                rho_rel: 1.0,
                phi_rad: 0.0
            };
            n_frames.max(1)
        ],
    )
}
