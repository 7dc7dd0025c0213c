//! Plane-wave downlink through a stack of frozen-flow phase screens.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{warn_if_aliased, ComplexField, Propagator};
use super::profile::{airmass, layer_r0, Cn2Profile};
use super::screen::{make_phase_strip, PhaseScreen};
use crate::error::{invalid, Error, Result};
use crate::math::is_power_of_two;

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Simulation grid: `n × n` samples spanning `extent_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub extent_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 512, extent_m: 2.0 }
    }
}

impl GridConfig {
    /// Half-resolution grid for quick runs.
    pub fn fast() -> Self {
        Self { n: 256, extent_m: 2.0 }
    }

    pub fn pitch_m(&self) -> f64 {
        self.extent_m / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !is_power_of_two(self.n) {
            return invalid(format!("grid size must be a power of two, got {}", self.n));
        }
        if !(self.extent_m > 0.0 && self.extent_m.is_finite()) {
            return invalid(format!("grid extent must be positive, got {}", self.extent_m));
        }
        Ok(())
    }
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(f64::to_radians)
    }
}

/// Link geometry and optics for the downlink propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownlinkConfig {
    pub wavelength_m: f64,
    #[serde(rename = "elevation_deg", with = "degrees")]
    pub elevation_rad: f64,
    pub satellite_velocity_m_s: f64,
    pub satellite_altitude_m: f64,
    pub pupil_d_m: f64,
    pub frame_rate_hz: f64,
    pub grid: GridConfig,
    /// Fraction of the grid on each side covered by the absorbing taper.
    pub absorber_fraction: f64,
}

impl Default for DownlinkConfig {
    fn default() -> Self {
        Self {
            wavelength_m: 1.55e-6,
            elevation_rad: 20f64.to_radians(),
            satellite_velocity_m_s: 6500.0,
            satellite_altitude_m: 500_000.0,
            pupil_d_m: 0.5,
            frame_rate_hz: 5000.0,
            grid: GridConfig::default(),
            absorber_fraction: 0.125,
        }
    }
}

impl DownlinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.wavelength_m > 0.0) {
            return invalid("wavelength must be positive");
        }
        if !(self.elevation_rad > 0.0 && self.elevation_rad <= PI / 2.0 + 1e-12) {
            return invalid("elevation must lie in (0, π/2]");
        }
        if !(self.pupil_d_m > 0.0 && self.pupil_d_m < self.grid.extent_m) {
            return invalid("pupil must be positive and smaller than the grid");
        }
        if !(self.frame_rate_hz > 0.0) {
            return invalid("frame rate must be positive");
        }
        if !(self.satellite_altitude_m > 0.0 && self.satellite_velocity_m_s >= 0.0) {
            return invalid("satellite altitude must be positive and velocity nonnegative");
        }
        if !(0.0..0.5).contains(&self.absorber_fraction) {
            return invalid("absorber fraction must lie in [0, 0.5)");
        }
        Ok(())
    }

    /// Slant range from the ground station to the satellite over a
    /// spherical Earth.
    pub fn slant_range_m(&self) -> f64 {
        let re = EARTH_RADIUS_M;
        let rs = re + self.satellite_altitude_m;
        let (s, c) = self.elevation_rad.sin_cos();
        (rs * rs - (re * c).powi(2)).sqrt() - re * s
    }

    /// Apparent transverse speed of the line of sight at altitude `h` due to
    /// the satellite motion.
    pub fn slew_speed_m_s(&self, h: f64) -> f64 {
        self.satellite_velocity_m_s * h * airmass(self.elevation_rad) / self.slant_range_m()
    }

    /// Pupil diameter in grid pixels.
    pub fn pupil_pixels(&self) -> f64 {
        self.pupil_d_m / self.grid.pitch_m()
    }
}

#[derive(Debug, Clone)]
struct LayerScreen {
    /// Velocity in pixels per second.
    vx: f64,
    vy: f64,
    /// Window origin at t = 0.
    x0: f64,
    y0: f64,
    active: bool,
    screen: PhaseScreen,
}

/// Pupil crop of the propagated field at one time step, with the
/// geometric line-of-sight phase sum used by the wavefront sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilFrame {
    pub t_s: f64,
    pub n: usize,
    pub pitch_m: f64,
    pub field: Vec<Complex64>,
    pub phase: Vec<f64>,
}

impl PupilFrame {
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch_m
    }
}

/// Immutable per-layer screens valid over `[0, duration_s]`.
#[derive(Debug, Clone)]
pub struct ScreenBank {
    config: DownlinkConfig,
    duration_s: f64,
    layers: Vec<LayerScreen>,
    /// Transfer function from the layer above (or h_max) down to each layer.
    hops: Vec<Vec<Complex64>>,
    /// Transfer function from the lowest layer to the ground.
    ground: Vec<Complex64>,
    mask: Vec<f64>,
}

fn pupil_crop_size(config: &DownlinkConfig) -> usize {
    let px = config.pupil_pixels().ceil() as usize + 4;
    (px + 1) & !1
}

impl ScreenBank {
    pub fn build(profile: &Cn2Profile, config: &DownlinkConfig, duration_s: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        if !(duration_s >= 0.0 && duration_s.is_finite()) {
            return invalid(format!("duration must be nonnegative, got {duration_s}"));
        }
        let n = config.grid.n;
        let pitch = config.grid.pitch_m();
        let secz = airmass(config.elevation_rad);

        let specs: Vec<_> = profile
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                let (s, c) = layer.wind_direction_rad.sin_cos();
                let vx = (layer.wind_speed_m_s * c + config.slew_speed_m_s(layer.altitude_m)) / pitch;
                let vy = layer.wind_speed_m_s * s / pitch;
                let sx = (vx.abs() * duration_s).ceil() as usize;
                let sy = (vy.abs() * duration_s).ceil() as usize;
                let nx = (n + sx + 2).next_power_of_two();
                let ny = (n + sy + 2).next_power_of_two();
                let r0 = layer_r0(layer, config.wavelength_m, config.elevation_rad);
                (i, vx, vy, nx, ny, r0)
            })
            .collect();

        let layers = specs
            .into_par_iter()
            .map(|(i, vx, vy, nx, ny, r0)| {
                let layer_seed = seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1));
                let active = r0.is_finite();
                let (nx, ny) = if active { (nx, ny) } else { (1, 1) };
                let screen = make_phase_strip(r0, profile.outer_scale_m, nx, ny, pitch, layer_seed)?;
                let x0 = if active && vx > 0.0 {
                    (screen.nx - n - 1) as f64
                } else {
                    0.0
                };
                let y0 = if active && vy > 0.0 {
                    (screen.ny - n - 1) as f64
                } else {
                    0.0
                };
                Ok(LayerScreen {
                    vx,
                    vy,
                    x0,
                    y0,
                    active,
                    screen,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let prop = Propagator::new(n, pitch, config.wavelength_m);
        let mut hops = Vec::with_capacity(layers.len());
        let mut above = profile.h_max_m;
        for layer in profile.layers.iter().rev() {
            let dz = (above - layer.altitude_m) * secz;
            warn_if_aliased(n, pitch, config.wavelength_m, dz);
            hops.push(prop.transfer(dz));
            above = layer.altitude_m;
        }
        hops.reverse();
        warn_if_aliased(n, pitch, config.wavelength_m, above * secz);
        let ground = prop.transfer(above * secz);

        Ok(Self {
            hops,
            ground,
            mask: absorber_mask(n, config.absorber_fraction),
            config: config.clone(),
            duration_s,
            layers,
        })
    }

    pub fn config(&self) -> &DownlinkConfig {
        &self.config
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    /// Memory held by the screens, in bytes.
    pub fn screen_bytes(&self) -> usize {
        self.layers.iter().map(|l| l.screen.data.len() * 4).sum()
    }

    /// Bilinear `m × m` window of a layer at time `t`, offset by `off`
    /// pixels from the full-grid origin.
    fn window(&self, layer: &LayerScreen, t: f64, off: usize, m: usize, out: &mut [f64]) -> Result<()> {
        let ox = layer.x0 - layer.vx * t + off as f64;
        let oy = layer.y0 - layer.vy * t + off as f64;
        if t < 0.0 || !layer.screen.window_into(ox, oy, m, out) {
            let n = self.config.grid.n;
            let pitch = self.config.grid.pitch_m();
            let requested = (layer.vx.hypot(layer.vy) * t * pitch).abs();
            let available = ((layer.screen.nx - n - 1) as f64).hypot((layer.screen.ny - n - 1) as f64) * pitch;
            return Err(Error::ScreenExhausted { requested, available });
        }
        Ok(())
    }

    /// Full-grid field at the ground at time `t`.
    pub fn propagate(&self, t: f64) -> Result<ComplexField> {
        let mut work = Workspace::new(&self.config);
        let mut data = vec![Complex64::default(); self.config.grid.n.pow(2)];
        self.propagate_into(t, &mut work, &mut data)?;
        ComplexField::new(
            self.config.grid.n,
            self.config.grid.pitch_m(),
            self.config.wavelength_m,
            data,
        )
    }

    fn propagate_into(&self, t: f64, work: &mut Workspace, data: &mut [Complex64]) -> Result<()> {
        data.fill(Complex64::new(1.0, 0.0));
        let mut flat = true;
        for (layer, hop) in self.layers.iter().zip(&self.hops).rev() {
            if !flat {
                work.prop.apply(data, hop);
            }
            if !layer.active {
                continue;
            }
            self.window(layer, t, 0, self.config.grid.n, &mut work.phase)?;
            for ((d, &p), &m) in data.iter_mut().zip(&work.phase).zip(&self.mask) {
                let (s, c) = p.sin_cos();
                *d *= Complex64::new(c * m, s * m);
            }
            flat = false;
        }
        if !flat {
            work.prop.apply(data, &self.ground);
        }
        Ok(())
    }

    /// Geometric line-of-sight phase sum on the centred `m × m` crop.
    pub fn phase_sum(&self, t: f64, m: usize) -> Result<Vec<f64>> {
        let n = self.config.grid.n;
        if m > n {
            return invalid(format!("crop of {m} px exceeds the {n} px grid"));
        }
        let off = n / 2 - m / 2;
        let mut total = vec![0.0; m * m];
        let mut buf = vec![0.0; m * m];
        for layer in self.layers.iter().filter(|l| l.active) {
            self.window(layer, t, off, m, &mut buf)?;
            for (a, b) in total.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        Ok(total)
    }

    /// Pupil crop of the field and the line-of-sight phase at time `t`.
    pub fn pupil_frame(&self, t: f64) -> Result<PupilFrame> {
        let mut work = Workspace::new(&self.config);
        self.pupil_frame_with(t, &mut work)
    }

    fn pupil_frame_with(&self, t: f64, work: &mut Workspace) -> Result<PupilFrame> {
        let n = self.config.grid.n;
        let mut data = std::mem::take(&mut work.field);
        self.propagate_into(t, work, &mut data)?;
        let m = pupil_crop_size(&self.config);
        let phase = self.phase_sum(t, m)?;
        let off = n / 2 - m / 2;
        let mut field = Vec::with_capacity(m * m);
        for iy in 0..m {
            let row = (off + iy) * n + off;
            field.extend_from_slice(&data[row..row + m]);
        }
        work.field = data;
        Ok(PupilFrame {
            t_s: t,
            n: m,
            pitch_m: self.config.grid.pitch_m(),
            field,
            phase,
        })
    }

    /// Pupil frames at `t_k = k / frame_rate` for `k` in `0..n_frames`,
    /// computed in parallel and returned in order.
    pub fn pupil_frames(&self, n_frames: usize) -> Result<Vec<PupilFrame>> {
        self.pupil_frames_range(0, n_frames)
    }

    pub fn pupil_frames_range(&self, start: usize, end: usize) -> Result<Vec<PupilFrame>> {
        let rate = self.config.frame_rate_hz;
        (start..end)
            .into_par_iter()
            .map_init(
                || Workspace::new(&self.config),
                |work, k| self.pupil_frame_with(k as f64 / rate, work),
            )
            .collect()
    }
}

struct Workspace {
    prop: Propagator,
    phase: Vec<f64>,
    field: Vec<Complex64>,
}

impl Workspace {
    fn new(config: &DownlinkConfig) -> Self {
        let n = config.grid.n;
        Self {
            prop: Propagator::new(n, config.grid.pitch_m(), config.wavelength_m),
            phase: vec![0.0; n * n],
            field: vec![Complex64::default(); n * n],
        }
    }
}

/// Separable cos² taper falling to zero at the grid edge.
fn absorber_mask(n: usize, fraction: f64) -> Vec<f64> {
    let width = (fraction * n as f64).round();
    let edge: Vec<f64> = (0..n)
        .map(|i| {
            let d = (i.min(n - 1 - i)) as f64;
            if width == 0.0 || d >= width {
                1.0
            } else {
                (0.5 * PI * (d + 0.5) / width).sin().powi(2)
            }
        })
        .collect();
    let mut mask = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            mask.push(edge[ix] * edge[iy]);
        }
    }
    mask
}

/// Single-shot downlink field at time `t` for the given seed.
pub fn propagate_downlink(profile: &Cn2Profile, config: &DownlinkConfig, t: f64, seed: u64) -> Result<ComplexField> {
    ScreenBank::build(profile, config, t, seed)?.propagate(t)
}

/// Sampled pupil-plane field with a centred pixel origin.
pub trait PupilSampled {
    fn grid_n(&self) -> usize;
    fn grid_pitch(&self) -> f64;
    fn samples(&self) -> &[Complex64];
}

impl PupilSampled for ComplexField {
    fn grid_n(&self) -> usize {
        self.n
    }
    fn grid_pitch(&self) -> f64 {
        self.pitch_m
    }
    fn samples(&self) -> &[Complex64] {
        &self.data
    }
}

impl PupilSampled for PupilFrame {
    fn grid_n(&self) -> usize {
        self.n
    }
    fn grid_pitch(&self) -> f64 {
        self.pitch_m
    }
    fn samples(&self) -> &[Complex64] {
        &self.field
    }
}

/// Indices of pixels with 2|r| ≤ D on a centred `n × n` grid.
pub fn pupil_indices(n: usize, pitch: f64, pupil_d: f64) -> Vec<usize> {
    let r2max = (0.5 * pupil_d).powi(2) * (1.0 + 1e-12);
    let c = (n / 2) as f64;
    let mut idx = Vec::new();
    for iy in 0..n {
        let y = (iy as f64 - c) * pitch;
        for ix in 0..n {
            let x = (ix as f64 - c) * pitch;
            if x * x + y * y <= r2max {
                idx.push(iy * n + ix);
            }
        }
    }
    idx
}

/// ⟨I²⟩/⟨I⟩² − 1 over pupil pixels and frames.
pub fn scintillation_index_empirical<'a, F, I>(fields: I, pupil_d: f64) -> Result<f64>
where
    F: PupilSampled + 'a,
    I: IntoIterator<Item = &'a F>,
{
    if !(pupil_d > 0.0) {
        return invalid(format!("pupil diameter must be positive, got {pupil_d}"));
    }
    let mut idx: Option<(usize, f64, Vec<usize>)> = None;
    let (mut s1, mut s2, mut count, mut frames) = (0.0, 0.0, 0usize, 0usize);
    for f in fields {
        let (n, pitch) = (f.grid_n(), f.grid_pitch());
        let stale = idx.as_ref().is_none_or(|(m, p, _)| *m != n || *p != pitch);
        if stale {
            if idx.is_some() {
                return Err(Error::GridMismatch("fields use different grids".into()));
            }
            idx = Some((n, pitch, pupil_indices(n, pitch, pupil_d)));
        }
        let pix = &idx.as_ref().unwrap().2;
        if pix.is_empty() {
            return Err(Error::EmptyPupil);
        }
        let data = f.samples();
        for &i in pix {
            let v = data[i].norm_sqr();
            s1 += v;
            s2 += v * v;
        }
        count += pix.len();
        frames += 1;
    }
    if frames < 2 {
        return invalid("need at least two fields");
    }
    let m1 = s1 / count as f64;
    Ok(s2 / count as f64 / (m1 * m1) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turbulence::profile::TurbulenceParams;

    fn small_config() -> DownlinkConfig {
        DownlinkConfig {
            grid: GridConfig { n: 64, extent_m: 2.0 },
            ..DownlinkConfig::default()
        }
    }

    #[test]
    fn slant_range_for_default_geometry() {
        let r = DownlinkConfig::default().slant_range_m();
        assert!((r - 1_193_000.0).abs() < 2_000.0, "{r}");
        let zen = DownlinkConfig {
            elevation_rad: PI / 2.0,
            ..DownlinkConfig::default()
        };
        assert!((zen.slant_range_m() - 500_000.0).abs() < 1e-6);
    }

    #[test]
    fn zero_turbulence_gives_plane_wave() {
        let p = Cn2Profile::hufnagel_valley(&TurbulenceParams::default())
            .unwrap()
            .zeroed();
        let f = propagate_downlink(&p, &small_config(), 0.01, 3).unwrap();
        for c in &f.data {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_time_is_deterministic() {
        let p = Cn2Profile::hufnagel_valley(&TurbulenceParams {
            n_layers: 5,
            ..TurbulenceParams::default()
        })
        .unwrap();
        let bank = ScreenBank::build(&p, &small_config(), 0.002, 11).unwrap();
        assert_eq!(bank.propagate(0.0).unwrap(), bank.propagate(0.0).unwrap());
        assert_ne!(bank.propagate(0.0).unwrap(), bank.propagate(0.002).unwrap());
        assert!(matches!(bank.propagate(0.05), Err(Error::ScreenExhausted { .. })));
    }

    #[test]
    fn scintillation_toy_values() {
        let ones = ComplexField::plane_wave(16, 0.1, 1e-6).unwrap();
        let mut threes = ones.clone();
        for c in &mut threes.data {
            *c *= 3f64.sqrt();
        }
        let s = scintillation_index_empirical([&ones, &threes], 1.0).unwrap();
        assert!((s - 0.25).abs() < 1e-12);
        let s = scintillation_index_empirical([&ones, &ones], 1.0).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(scintillation_index_empirical([&ones], 1.0).is_err());
        assert!(scintillation_index_empirical([&ones, &ones], 0.0).is_err());
    }
}
