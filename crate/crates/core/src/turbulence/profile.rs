use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::gauss_legendre;

/// Bufton profile tropopause altitude (m).
pub const BUFTON_PEAK_M: f64 = 9_400.0;
/// Bufton profile tropopause half-width (m).
pub const BUFTON_WIDTH_M: f64 = 4_800.0;

/// Hufnagel–Valley Cn²(h) in m^-2/3 (ITU-R P.1621 parameterization, h in metres).
pub fn hv_cn2(h_m: f64, c0: f64, v_rms: f64) -> Result<f64> {
    if !(h_m >= 0.0 && c0 >= 0.0 && v_rms >= 0.0) {
        return invalid(format!(
            "Hufnagel-Valley arguments must be non-negative (h={h_m}, c0={c0}, v_rms={v_rms})"
        ));
    }
    Ok(hv_unchecked(h_m, c0, v_rms))
}

#[inline]
fn hv_unchecked(h: f64, c0: f64, v_rms: f64) -> f64 {
    8.148e-56 * v_rms * v_rms * h.powi(10) * (-h / 1000.0).exp()
        + 2.7e-16 * (-h / 1500.0).exp()
        + c0 * (-h / 100.0).exp()
}

/// Bufton wind speed V(h) = v_G + v_T·exp(−((h − 9400)/4800)²).
pub fn bufton_wind(h_m: f64, v_ground: f64, v_tropopause: f64) -> Result<f64> {
    if !(h_m >= 0.0) {
        return invalid(format!("altitude must be non-negative, got {h_m}"));
    }
    let u = (h_m - BUFTON_PEAK_M) / BUFTON_WIDTH_M;
    Ok(v_ground + v_tropopause * (-u * u).exp())
}

/// Physical description of the turbulent channel (Table-I style inputs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbulenceParams {
    pub c0: f64,
    pub v_rms: f64,
    pub v_ground: f64,
    pub v_tropopause: f64,
    pub h_max_m: f64,
    pub outer_scale_m: f64,
    pub n_layers: usize,
    pub placement: LayerPlacement,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        Self {
            c0: 1e-13,
            v_rms: 20.0,
            v_ground: 10.0,
            v_tropopause: 20.0,
            h_max_m: 20_000.0,
            outer_scale_m: 5.0,
            n_layers: 35,
            placement: LayerPlacement::EqualScintillation,
        }
    }
}

/// How slab boundaries are chosen when discretizing the continuous profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerPlacement {
    /// Equal share of ∫Cn² dh per slab (equal r₀ contribution).
    EqualCn2,
    /// Equal share of ∫Cn²·h^(5/6) dh per slab (equal Rytov contribution).
    EqualScintillation,
    /// Equal slab thickness.
    EqualAltitude,
}

/// One discrete turbulent layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub altitude_m: f64,
    pub thickness_m: f64,
    /// Mean Cn² over the slab; cn2·thickness is the slab's ∫Cn² dh.
    pub cn2: f64,
    pub wind_speed_m_s: f64,
    pub wind_direction_rad: f64,
}

impl Layer {
    pub fn integrated_cn2(&self) -> f64 {
        self.cn2 * self.thickness_m
    }
}

pub const DEFAULT_OUTER_SCALE_M: f64 = 5.0;

/// Layered Cn² profile with wind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cn2Profile {
    pub layers: Vec<Layer>,
    pub c0: f64,
    pub v_rms: f64,
    pub h_max_m: f64,
    /// von Kármán outer scale L₀ shared by all layers.
    pub outer_scale_m: f64,
}

impl Cn2Profile {
    /// Validates and wraps an explicit layer list.
    pub fn from_layers(layers: Vec<Layer>, c0: f64, v_rms: f64, h_max_m: f64) -> Result<Self> {
        if layers.is_empty() {
            return invalid("profile needs at least one layer");
        }
        let mut prev_alt = 0.0;
        let mut top = 0.0;
        for (i, l) in layers.iter().enumerate() {
            if !(l.altitude_m > prev_alt && l.altitude_m <= h_max_m) {
                return invalid(format!(
                    "layer {i} altitude {} must increase strictly within (0, {h_max_m}]",
                    l.altitude_m
                ));
            }
            if !(l.cn2 >= 0.0 && l.thickness_m > 0.0) {
                return invalid(format!("layer {i} needs cn2 >= 0 and thickness > 0"));
            }
            top += l.thickness_m;
            prev_alt = l.altitude_m;
        }
        if (top - h_max_m).abs() > 1e-6 * h_max_m {
            return invalid(format!("layer thicknesses sum to {top} m, expected {h_max_m} m"));
        }
        Ok(Self {
            layers,
            c0,
            v_rms,
            h_max_m,
            outer_scale_m: DEFAULT_OUTER_SCALE_M,
        })
    }

    pub fn with_outer_scale(mut self, outer_scale_m: f64) -> Result<Self> {
        if !(outer_scale_m > 0.0 && outer_scale_m.is_finite()) {
            return invalid(format!("outer scale must be positive, got {outer_scale_m}"));
        }
        self.outer_scale_m = outer_scale_m;
        Ok(self)
    }

    /// Discretizes the Hufnagel–Valley profile with a Bufton wind.
    ///
    /// Each slab keeps its exact ∫Cn² dh, and its layer sits at the altitude
    /// that also preserves ∫Cn²·h^(5/6) dh, so both r₀ and the Rytov index of
    /// the layered profile equal those of the continuous one.
    pub fn hufnagel_valley(p: &TurbulenceParams) -> Result<Self> {
        if p.n_layers == 0 {
            return invalid("profile needs at least one layer");
        }
        if !(p.h_max_m > 0.0) {
            return invalid("h_max must be positive");
        }
        hv_cn2(0.0, p.c0, p.v_rms)?;
        let (c0, v) = (p.c0, p.v_rms);
        let cn2 = move |h: f64| hv_unchecked(h, c0, v);
        let weight: Box<dyn Fn(f64) -> f64> = match p.placement {
            LayerPlacement::EqualCn2 => Box::new(cn2),
            LayerPlacement::EqualScintillation => Box::new(move |h: f64| cn2(h) * h.powf(5.0 / 6.0)),
            LayerPlacement::EqualAltitude => Box::new(|_| 1.0),
        };
        let bounds = equal_share_bounds(&*weight, p.h_max_m, p.n_layers);
        let mut layers = Vec::with_capacity(p.n_layers);
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let m0 = integrate(cn2, lo, hi);
            let m56 = integrate(|h| cn2(h) * h.powf(5.0 / 6.0), lo, hi);
            let altitude = if m0 > 0.0 {
                (m56 / m0).powf(6.0 / 5.0).clamp(lo.max(f64::MIN_POSITIVE), hi)
            } else {
                0.5 * (lo + hi)
            };
            layers.push(Layer {
                altitude_m: altitude,
                thickness_m: hi - lo,
                cn2: m0 / (hi - lo),
                wind_speed_m_s: bufton_wind(altitude, p.v_ground, p.v_tropopause)?,
                wind_direction_rad: 0.0,
            });
        }
        Self::from_layers(layers, p.c0, p.v_rms, p.h_max_m)?.with_outer_scale(p.outer_scale_m)
    }

    /// Σ Cn²·Δh over layers (m^1/3).
    pub fn integrated_cn2(&self) -> f64 {
        self.layers.iter().map(Layer::integrated_cn2).sum()
    }

    /// Σ Cn²·Δh·h^(5/6) over layers.
    pub fn integrated_cn2_h56(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.integrated_cn2() * l.altitude_m.powf(5.0 / 6.0))
            .sum()
    }

    /// Copy of the profile with every layer's Cn² set to zero.
    pub fn zeroed(&self) -> Self {
        let mut p = self.clone();
        for l in &mut p.layers {
            l.cn2 = 0.0;
        }
        p
    }
}

/// ∫ f over [a, b] using panels no wider than 5 m.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / 5.0).ceil().max(1.0) as usize;
    gauss_legendre(f, a, b, panels)
}

/// Boundaries 0 = b₀ < … < b_n = h_max splitting ∫w into equal shares.
fn equal_share_bounds(w: &dyn Fn(f64) -> f64, h_max: f64, n: usize) -> Vec<f64> {
    let steps = 40_000usize;
    let dh = h_max / steps as f64;
    let mut cum = Vec::with_capacity(steps + 1);
    cum.push(0.0);
    for i in 0..steps {
        let a = i as f64 * dh;
        cum.push(cum[i] + gauss_legendre(w, a, a + dh, 1));
    }
    let total = cum[steps];
    let mut bounds = vec![0.0];
    for j in 1..n {
        let target = total * j as f64 / n as f64;
        let i = cum.partition_point(|&c| c < target).clamp(1, steps);
        let (c0, c1) = (cum[i - 1], cum[i]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        let b = (i as f64 - 1.0 + frac) * dh;
        let last = *bounds.last().unwrap();
        bounds.push(b.max(last + 1e-6 * h_max).min(h_max));
    }
    bounds.push(h_max);
    bounds
}

fn check_geometry(wavelength: f64, elevation_rad: f64) -> Result<()> {
    if !(wavelength > 0.0) {
        return invalid(format!("wavelength must be positive, got {wavelength}"));
    }
    if !(elevation_rad > 0.0 && elevation_rad <= PI / 2.0 + 1e-12) {
        return invalid(format!("elevation must lie in (0, π/2], got {elevation_rad}"));
    }
    Ok(())
}

/// Airmass sec ζ for an elevation angle.
pub fn airmass(elevation_rad: f64) -> f64 {
    1.0 / elevation_rad.sin()
}

/// Fried parameter along the slant path, r₀ = [0.423·k²·sec ζ·∫Cn² dh]^(−3/5).
pub fn fried_parameter(profile: &Cn2Profile, wavelength: f64, elevation_rad: f64) -> Result<f64> {
    check_geometry(wavelength, elevation_rad)?;
    let integral = profile.integrated_cn2();
    if integral <= 0.0 {
        return Err(Error::NoTurbulence);
    }
    let k = 2.0 * PI / wavelength;
    Ok((0.423 * k * k * airmass(elevation_rad) * integral).powf(-3.0 / 5.0))
}

/// Plane-wave Rytov scintillation index,
/// σ_I² = 2.25·k^(7/6)·sec^(11/6) ζ·∫Cn²(h)·h^(5/6) dh.
pub fn rytov_index(profile: &Cn2Profile, wavelength: f64, elevation_rad: f64) -> Result<f64> {
    check_geometry(wavelength, elevation_rad)?;
    let k = 2.0 * PI / wavelength;
    Ok(2.25 * k.powf(7.0 / 6.0) * airmass(elevation_rad).powf(11.0 / 6.0) * profile.integrated_cn2_h56())
}

/// Fried parameter of a single layer seen along the slant path.
pub fn layer_r0(layer: &Layer, wavelength: f64, elevation_rad: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    (0.423 * k * k * airmass(elevation_rad) * layer.integrated_cn2()).powf(-3.0 / 5.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hv_at_ground_is_c0_plus_background() {
        let v = hv_cn2(0.0, 1e-13, 20.0).unwrap();
        assert!((v - 1.0027e-13).abs() < 1e-25, "{v}");
        assert!(hv_cn2(1e6, 1e-13, 20.0).unwrap() < 1e-30);
        assert!(hv_cn2(-1.0, 1e-13, 20.0).is_err());
        assert!(hv_cn2(0.0, -1.0, 20.0).is_err());
    }

    #[test]
    fn bufton_values() {
        assert!((bufton_wind(9_400.0, 10.0, 20.0).unwrap() - 30.0).abs() < 1e-12);
        let g = bufton_wind(0.0, 10.0, 20.0).unwrap();
        assert!((g - 10.43).abs() < 0.01, "{g}");
        assert!(bufton_wind(-5.0, 10.0, 20.0).is_err());
    }

    #[test]
    fn layered_profile_invariants() {
        for placement in [
            LayerPlacement::EqualCn2,
            LayerPlacement::EqualScintillation,
            LayerPlacement::EqualAltitude,
        ] {
            let p = Cn2Profile::hufnagel_valley(&TurbulenceParams {
                placement,
                ..Default::default()
            })
            .unwrap();
            assert_eq!(p.layers.len(), 35);
            let mut top = 0.0;
            for w in p.layers.windows(2) {
                assert!(w[1].altitude_m > w[0].altitude_m);
            }
            for l in &p.layers {
                assert!(l.cn2 >= 0.0);
                assert!(l.altitude_m > top && l.altitude_m <= top + l.thickness_m + 1e-9);
                top += l.thickness_m;
            }
            assert!((top - 20_000.0).abs() < 1e-6);
        }
    }

    #[test]
    fn from_layers_rejects_overlap_and_empty() {
        assert!(Cn2Profile::from_layers(vec![], 0.0, 0.0, 1.0).is_err());
        let l = Layer {
            altitude_m: 100.0,
            thickness_m: 500.0,
            cn2: 1e-15,
            wind_speed_m_s: 5.0,
            wind_direction_rad: 0.0,
        };
        assert!(Cn2Profile::from_layers(vec![l, l], 0.0, 0.0, 1000.0).is_err());
        assert!(Cn2Profile::from_layers(vec![l], 0.0, 0.0, 1000.0).is_err());
    }

    #[test]
    fn no_turbulence_is_an_error() {
        let p = Cn2Profile::hufnagel_valley(&TurbulenceParams::default()).unwrap();
        assert!(matches!(
            fried_parameter(&p.zeroed(), 1.55e-6, 0.5),
            Err(Error::NoTurbulence)
        ));
        assert_eq!(rytov_index(&p.zeroed(), 1.55e-6, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn fried_scaling_laws() {
        let p = Cn2Profile::hufnagel_valley(&TurbulenceParams::default()).unwrap();
        let el = 20f64.to_radians();
        let r = fried_parameter(&p, 1.55e-6, el).unwrap();
        let zen = fried_parameter(&p, 1.55e-6, PI / 2.0).unwrap();
        assert!((zen / r - airmass(el).powf(0.6)).abs() < 1e-12);
        let r2 = fried_parameter(&p, 3.1e-6, el).unwrap();
        assert!((r2 / r - 2f64.powf(1.2)).abs() < 1e-12);
        let stronger = Cn2Profile::hufnagel_valley(&TurbulenceParams {
            c0: 2e-13,
            ..Default::default()
        })
        .unwrap();
        assert!(fried_parameter(&stronger, 1.55e-6, el).unwrap() < r);
        assert!(fried_parameter(&p, 1.55e-6, 0.0).is_err());
    }

    #[test]
    fn rytov_elevation_ratio() {
        let p = Cn2Profile::hufnagel_valley(&TurbulenceParams::default()).unwrap();
        let low = rytov_index(&p, 1.55e-6, 20f64.to_radians()).unwrap();
        let zen = rytov_index(&p, 1.55e-6, PI / 2.0).unwrap();
        assert!((low / zen - 7.16).abs() < 0.05, "{}", low / zen);
    }
}
