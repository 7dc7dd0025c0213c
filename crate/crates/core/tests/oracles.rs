//! Library outputs checked against small independent computations.

use std::f64::consts::PI;

use approx::assert_relative_eq;

use linklab::ao::{AoLoop, AoLoopConfig, ZernikeBasis};
use linklab::turbulence::{fried_parameter, make_phase_screen, rytov_index, Cn2Profile, TurbulenceParams};

const WAVELENGTH: f64 = 1.55e-6;

fn elevation() -> f64 {
    20f64.to_radians()
}

fn hv(h: f64) -> f64 {
    let w = 20.0 / 27.0;
    0.00594 * w * w * (1e-5 * h).powi(10) * (-h / 1000.0).exp()
        + 2.7e-16 * (-h / 1500.0).exp()
        + 1e-13 * (-h / 100.0).exp()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn fried_parameter_matches_quadrature() {
    let k = 2.0 * PI / WAVELENGTH;
    let sec = 1.0 / elevation().sin();
    let integral = simpson(hv, 0.0, 20_000.0, 400_000);
    let r0 = (0.423 * k * k * sec * integral).powf(-0.6);

    let profile = Cn2Profile::hufnagel_valley(&TurbulenceParams::default()).unwrap();
    let lib = fried_parameter(&profile, WAVELENGTH, elevation()).unwrap();
    assert_relative_eq!(lib, r0, max_relative = 0.01);
    assert!((0.035..0.045).contains(&lib), "r0 = {lib}");
}

#[test]
fn rytov_index_matches_quadrature() {
    let k = 2.0 * PI / WAVELENGTH;
    let sec = 1.0 / elevation().sin();
    let integral = simpson(|h| hv(h) * h.powf(5.0 / 6.0), 0.0, 20_000.0, 400_000);
    let rytov = 2.25 * k.powf(7.0 / 6.0) * sec.powf(11.0 / 6.0) * integral;

    let profile = Cn2Profile::hufnagel_valley(&TurbulenceParams::default()).unwrap();
    let lib = rytov_index(&profile, WAVELENGTH, elevation()).unwrap();
    assert_relative_eq!(lib, rytov, max_relative = 0.01);
}

#[test]
fn screen_structure_function_is_kolmogorov() {
    let (n, pitch, r0) = (256, 0.01, 0.1);
    let lags = [2usize, 4, 8, 16];
    let mut acc = [0.0f64; 4];
    let mut count = 0usize;
    for seed in 0..200u64 {
        let s = make_phase_screen(r0, 1e4, n, pitch, seed).unwrap();
        for (a, &lag) in acc.iter_mut().zip(&lags) {
            for iy in (0..n).step_by(4) {
                for ix in (0..n - lag).step_by(4) {
                    let dx = s.at(ix + lag, iy) - s.at(ix, iy);
                    let dy = s.at(iy, ix + lag) - s.at(iy, ix);
                    *a += 0.5 * (dx * dx + dy * dy);
                }
            }
        }
        count += 1;
    }
    for (&a, &lag) in acc.iter().zip(&lags) {
        let samples = (count * (n / 4) * (n - lag).div_ceil(4)) as f64;
        let measured = a / samples;
        let theory = 6.88 * (lag as f64 * pitch / r0).powf(5.0 / 3.0);
        assert_relative_eq!(measured, theory, max_relative = 0.10);
    }
}

/// Per-mode delayed integrator written as a scalar recursion:
/// c(k) = c(k−1) + g·(a − c(k−d)) once k ≥ d.
fn scalar_loop(a: f64, g: f64, d: usize, frames: usize) -> Vec<f64> {
    let mut c = vec![0.0; frames];
    for k in 0..frames {
        let prev = if k > 0 { c[k - 1] } else { 0.0 };
        c[k] = if k >= d { prev + g * (a - c[k - d]) } else { prev };
    }
    c.iter().map(|ck| a - ck).collect()
}

fn loop_basis() -> ZernikeBasis {
    ZernikeBasis::new(21, 64, 0.01, 0.5).unwrap()
}

#[test]
fn ao_loop_follows_scalar_recursion() {
    let b = loop_basis();
    let cfg = AoLoopConfig {
        n_modes: 21,
        ..Default::default()
    };
    let a = 1.7;
    let mut coeffs = vec![0.0; 21];
    coeffs[3] = a;
    let phase = b.reconstruct_pupil(&coeffs).unwrap();
    let expected = scalar_loop(a, cfg.integrator_gain, cfg.delay_frames, 40);

    let mut ao = AoLoop::new(&b, cfg).unwrap();
    for (k, want) in expected.iter().enumerate() {
        let cor = ao.step_pupil(&phase).unwrap();
        let res: Vec<f64> = phase.iter().zip(&cor).map(|(t, c)| t - c).collect();
        let got = b.decompose_pupil(&res).unwrap()[3];
        assert!((got - want).abs() < 1e-9, "frame {k}: {got} vs {want}");
        if k >= 20 {
            assert!(got.abs() < 0.01 * a);
        }
    }
}

#[test]
fn ao_loop_leaves_piston_alone() {
    let b = loop_basis();
    let cfg = AoLoopConfig {
        n_modes: 21,
        ..Default::default()
    };
    let mut coeffs = vec![0.0; 21];
    coeffs[0] = 0.8;
    coeffs[1] = -2.0;
    coeffs[5] = 0.4;
    let phase = b.reconstruct_pupil(&coeffs).unwrap();
    let piston = b
        .reconstruct_pupil(&{
            let mut p = vec![0.0; 21];
            p[0] = 0.8;
            p
        })
        .unwrap();

    let mut ao = AoLoop::new(&b, cfg).unwrap();
    let mut res = Vec::new();
    for _ in 0..60 {
        let cor = ao.step_pupil(&phase).unwrap();
        res = phase.iter().zip(&cor).map(|(t, c)| t - c).collect();
    }
    assert_eq!(ao.command()[0], 0.0);
    for (r, p) in res.iter().zip(&piston) {
        assert!((r - p).abs() < 1e-6);
    }
}
