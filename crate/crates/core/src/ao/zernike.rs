//! Noll-indexed Zernike polynomials sampled on a centred grid.

use crate::error::{invalid, Error, Result};

/// Minimum pupil diameter in pixels for a usable modal basis.
pub const MIN_PUPIL_PIXELS: usize = 16;

/// Radial order `n` and signed azimuthal order `m` of Noll index `j`.
/// Negative `m` denotes a sine term.
pub fn noll_to_nm(j: usize) -> (usize, i32) {
    assert!(j >= 1, "Noll indices start at 1");
    let mut n = 0;
    while (n + 1) * (n + 2) / 2 < j {
        n += 1;
    }
    let r = j - n * (n + 1) / 2 - 1;
    let m = if n % 2 == 0 { 2 * r.div_ceil(2) } else { 2 * (r / 2) + 1 } as i32;
    if m != 0 && j % 2 == 1 {
        (n, -m)
    } else {
        (n, m)
    }
}

/// Number of modes up to and including radial order `n`.
pub fn modes_through_order(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Radial polynomial coefficients (power, coefficient) of R_n^|m|.
fn radial_terms(n: usize, m: usize) -> Vec<(i32, f64)> {
    (0..=(n - m) / 2)
        .map(|s| {
            let c = factorial(n - s) / (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
            ((n - 2 * s) as i32, if s % 2 == 0 { c } else { -c })
        })
        .collect()
}

/// Noll-normalized Z_j at polar coordinates (ρ ≤ 1, θ).
pub fn zernike_value(j: usize, rho: f64, theta: f64) -> f64 {
    let (n, m) = noll_to_nm(j);
    let am = m.unsigned_abs() as usize;
    let radial: f64 = radial_terms(n, am).iter().map(|&(p, c)| c * rho.powi(p)).sum();
    if m == 0 {
        ((n + 1) as f64).sqrt() * radial
    } else {
        let ang = if m > 0 {
            (am as f64 * theta).cos()
        } else {
            (am as f64 * theta).sin()
        };
        (2.0 * (n + 1) as f64).sqrt() * radial * ang
    }
}

pub(crate) fn check_pupil(pitch: f64, pupil_d: f64) -> Result<()> {
    if !(pitch > 0.0 && pupil_d > 0.0) {
        return invalid("pitch and pupil diameter must be positive");
    }
    let pixels = pupil_d / pitch;
    if pixels < MIN_PUPIL_PIXELS as f64 {
        return Err(Error::UnderResolvedPupil {
            pixels,
            min: MIN_PUPIL_PIXELS,
        });
    }
    Ok(())
}

/// Z_j on an `n × n` grid centred on pixel n/2; zero outside 2|r| ≤ D.
pub fn zernike_mode(j: usize, n: usize, pitch: f64, pupil_d: f64) -> Result<Vec<f64>> {
    if j == 0 {
        return invalid("Noll index starts at 1");
    }
    check_pupil(pitch, pupil_d)?;
    let radius = 0.5 * pupil_d;
    let c = (n / 2) as f64;
    let mut map = vec![0.0; n * n];
    for iy in 0..n {
        let y = (iy as f64 - c) * pitch;
        for ix in 0..n {
            let x = (ix as f64 - c) * pitch;
            let rho = x.hypot(y) / radius;
            if rho <= 1.0 + 1e-12 {
                map[iy * n + ix] = zernike_value(j, rho, y.atan2(x));
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noll_ordering() {
        let expect = [
            (1, (0, 0)),
            (2, (1, 1)),
            (3, (1, -1)),
            (4, (2, 0)),
            (5, (2, -2)),
            (6, (2, 2)),
            (7, (3, -1)),
            (8, (3, 1)),
            (9, (3, -3)),
            (10, (3, 3)),
            (11, (4, 0)),
            (12, (4, 2)),
            (13, (4, -2)),
            (22, (6, 0)),
            (91, (12, -12)),
        ];
        for (j, nm) in expect {
            assert_eq!(noll_to_nm(j), nm, "j={j}");
        }
        assert_eq!(modes_through_order(12), 91);
    }

    #[test]
    fn defocus_closed_form() {
        let s3 = 3f64.sqrt();
        assert!((zernike_value(4, 0.0, 0.0) + s3).abs() < 1e-14);
        assert!((zernike_value(4, 1.0, 0.3) - s3).abs() < 1e-14);
        assert!((zernike_value(11, 0.5, 0.0) - 5f64.sqrt() * (6.0 / 16.0 - 6.0 / 4.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn piston_and_centre_value() {
        let z1 = zernike_mode(1, 40, 0.01, 0.32).unwrap();
        assert_eq!(z1[20 * 40 + 20], 1.0);
        assert_eq!(z1[0], 0.0);
        let z4 = zernike_mode(4, 40, 0.01, 0.32).unwrap();
        assert!((z4[20 * 40 + 20] + 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn under_resolved_pupil_rejected() {
        assert!(matches!(
            zernike_mode(2, 32, 0.01, 0.15),
            Err(Error::UnderResolvedPupil { .. })
        ));
        assert!(zernike_mode(0, 32, 0.01, 0.2).is_err());
    }
}
