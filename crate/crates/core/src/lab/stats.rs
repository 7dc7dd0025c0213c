use crate::error::{invalid, Error, Result};
use crate::math::wrap_pi;

/// Population variance of the phase error (nco − true) wrapped modulo π,
/// skipping the first `exclude` samples.
pub fn phase_error_stats(true_phase: &[f64], nco_phase: &[f64], exclude: usize) -> Result<f64> {
    if true_phase.len() != nco_phase.len() {
        return invalid(format!(
            "length mismatch: {} true vs {} nco phases",
            true_phase.len(),
            nco_phase.len()
        ));
    }
    if exclude >= true_phase.len() {
        return Err(Error::InvalidArgument("exclusion window leaves no samples".into()));
    }
    let mut acc = RunningVariance::default();
    for (t, n) in true_phase[exclude..].iter().zip(&nco_phase[exclude..]) {
        acc.push(wrap_pi(n - t));
    }
    Ok(acc.variance())
}

/// Welford accumulator for mean and population variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningVariance {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningVariance {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.m2 / self.n as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn identical_sequences_have_zero_variance() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        assert_eq!(phase_error_stats(&t, &t, 0).unwrap(), 0.0);
    }

    #[test]
    fn pi_offset_is_invisible() {
        let t: Vec<f64> = (0..100).map(|k| (k as f64 * 0.37).sin()).collect();
        let n: Vec<f64> = t.iter().map(|x| x + PI).collect();
        assert!(phase_error_stats(&t, &n, 10).unwrap() < 1e-20);
    }

    #[test]
    fn uniform_error_matches_pi_squared_over_12() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let t = vec![0.0; n];
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(-PI / 2.0..PI / 2.0)).collect();
        let v = phase_error_stats(&t, &e, 0).unwrap();
        let expected = PI * PI / 12.0;
        assert!((v / expected - 1.0).abs() < 0.02, "{v} vs {expected}");
    }

    #[test]
    fn errors_on_bad_input() {
        assert!(phase_error_stats(&[0.0; 3], &[0.0; 4], 0).is_err());
        assert!(phase_error_stats(&[0.0; 3], &[0.0; 3], 3).is_err());
    }
}
