//! Least-squares modal projection on the discrete pupil.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::zernike::{check_pupil, zernike_value};
use crate::error::{invalid, Error, Result};
use crate::turbulence::downlink::pupil_indices;

/// First `J` Noll modes sampled on the pupil pixels of an `n × n` grid.
#[derive(Debug, Clone)]
pub struct ZernikeBasis {
    pub n: usize,
    pub pitch_m: f64,
    pub pupil_d_m: f64,
    /// Row-major indices of the pupil pixels.
    pub indices: Vec<usize>,
    /// `modes[j - 1][p]` is Z_j at pupil pixel `p`.
    pub modes: Vec<Vec<f64>>,
    /// Pupil-averaged inner products ⟨Z_i, Z_j⟩.
    pub gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ZernikeBasis {
    pub fn new(n_modes: usize, n: usize, pitch: f64, pupil_d: f64) -> Result<Self> {
        if n_modes == 0 {
            return invalid("basis needs at least one mode");
        }
        check_pupil(pitch, pupil_d)?;
        if pupil_d > n as f64 * pitch {
            return invalid("pupil larger than the grid");
        }
        let indices = pupil_indices(n, pitch, pupil_d);
        if indices.is_empty() {
            return Err(Error::EmptyPupil);
        }
        let c = (n / 2) as f64;
        let radius = 0.5 * pupil_d;
        let polar: Vec<(f64, f64)> = indices
            .iter()
            .map(|&i| {
                let x = ((i % n) as f64 - c) * pitch;
                let y = ((i / n) as f64 - c) * pitch;
                ((x.hypot(y) / radius).min(1.0), y.atan2(x))
            })
            .collect();
        let modes: Vec<Vec<f64>> = (1..=n_modes)
            .map(|j| polar.iter().map(|&(r, t)| zernike_value(j, r, t)).collect())
            .collect();
        let p = indices.len() as f64;
        let gram = DMatrix::from_fn(n_modes, n_modes, |a, b| {
            modes[a].iter().zip(&modes[b]).map(|(x, y)| x * y).sum::<f64>() / p
        });
        let chol = Cholesky::new(gram.clone()).ok_or(Error::SingularGram)?;
        Ok(Self {
            n,
            pitch_m: pitch,
            pupil_d_m: pupil_d,
            indices,
            modes,
            gram,
            chol,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Largest |G − I| entry.
    pub fn gram_deviation(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.n_modes(), self.n_modes());
        (&self.gram - id).abs().max()
    }

    /// ‖G − I‖_F / ‖I‖_F.
    pub fn gram_frobenius_deviation(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.n_modes(), self.n_modes());
        (&self.gram - id).norm() / (self.n_modes() as f64).sqrt()
    }

    /// Least-squares coefficients for values given on the pupil pixels.
    pub fn decompose_pupil(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.indices.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} pupil samples, got {}",
                self.indices.len(),
                values.len()
            )));
        }
        let p = values.len() as f64;
        let rhs = DVector::from_iterator(
            self.n_modes(),
            self.modes
                .iter()
                .map(|z| z.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / p),
        );
        Ok(self.chol.solve(&rhs).iter().copied().collect())
    }

    /// Σ a_j Z_j on the pupil pixels.
    pub fn reconstruct_pupil(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n_modes() {
            return invalid(format!(
                "expected {} coefficients, got {}",
                self.n_modes(),
                coeffs.len()
            ));
        }
        let mut out = vec![0.0; self.indices.len()];
        for (a, z) in coeffs.iter().zip(&self.modes) {
            if *a != 0.0 {
                for (o, v) in out.iter_mut().zip(z) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }

    /// Pupil samples of a full `n × n` map.
    pub fn gather(&self, map: &[f64]) -> Result<Vec<f64>> {
        if map.len() != self.n * self.n {
            return Err(Error::GridMismatch(format!(
                "expected a {}×{} map, got {} samples",
                self.n,
                self.n,
                map.len()
            )));
        }
        Ok(self.indices.iter().map(|&i| map[i]).collect())
    }

    /// Full `n × n` map from pupil samples, zero outside.
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        let mut map = vec![0.0; self.n * self.n];
        for (&i, &v) in self.indices.iter().zip(values) {
            map[i] = v;
        }
        map
    }
}

/// Least-squares modal coefficients a_1..a_J of a full phase map.
pub fn modal_decompose(phase: &[f64], basis: &ZernikeBasis) -> Result<Vec<f64>> {
    basis.decompose_pupil(&basis.gather(phase)?)
}

/// Phase map Σ a_j Z_j over the pupil, zero outside.
pub fn modal_reconstruct(coeffs: &[f64], basis: &ZernikeBasis) -> Result<Vec<f64>> {
    Ok(basis.scatter(&basis.reconstruct_pupil(coeffs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ao::zernike::zernike_mode;

    fn basis() -> ZernikeBasis {
        ZernikeBasis::new(21, 48, 0.01, 0.44).unwrap()
    }

    #[test]
    fn recovers_single_mode() {
        let b = basis();
        let z4: Vec<f64> = zernike_mode(4, 48, 0.01, 0.44)
            .unwrap()
            .iter()
            .map(|v| 2.5 * v)
            .collect();
        let a = modal_decompose(&z4, &b).unwrap();
        for (j, v) in a.iter().enumerate() {
            let want = if j == 3 { 2.5 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "a_{} = {v}", j + 1);
        }
        let zero = modal_decompose(&vec![0.0; 48 * 48], &b).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tip_tilt_nearly_orthogonal() {
        let b = basis();
        assert!(b.gram[(1, 2)].abs() < 1e-2);
        assert!((b.gram[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_checks() {
        let b = basis();
        assert!(modal_reconstruct(&[1.0; 3], &b).is_err());
        assert!(modal_decompose(&[0.0; 10], &b).is_err());
    }
}
