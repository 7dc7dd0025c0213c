use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const V_CLAMP: f64 = 700.0;

/// Digital AGC with an exponential gain characteristic g = exp(−v/2).
///
/// The error e(k) = |g(k)·s(k)|² − P_ref is formed on the output and fed
/// through the integrator 1/(z−1), so it only affects the gain of the next
/// sample. For constant input power P the fixed point is g²·P = P_ref.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgcState {
    pub v: f64,
    pub g0: f64,
    pub p_ref: f64,
}

impl Default for AgcState {
    fn default() -> Self {
        Self::new(0.1, 1.0)
    }
}

impl AgcState {
    pub fn new(g0: f64, p_ref: f64) -> Self {
        Self { v: 0.0, g0, p_ref }
    }

    pub fn gain(&self) -> f64 {
        (-self.v / 2.0).exp()
    }

    /// Scales `x` with the current gain and updates the integrator.
    #[inline]
    pub fn step(&mut self, x: Complex64) -> Complex64 {
        let y = x * self.gain();
        let e = y.norm_sqr() - self.p_ref;
        self.v = (self.v + self.g0 * e).clamp(-V_CLAMP, V_CLAMP);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar recursion v ← v + g0·(e^{−v}·P − P_ref), written independently
    /// of the complex-sample implementation.
    fn scalar_oracle(v0: f64, powers: &[f64], g0: f64) -> Vec<f64> {
        let mut v = v0;
        powers
            .iter()
            .map(|&p| {
                let out = (-v).exp() * p;
                v += g0 * (out - 1.0);
                out
            })
            .collect()
    }

    #[test]
    fn converges_to_fixed_point() {
        let mut agc = AgcState::default();
        let x = Complex64::new(2.0, 0.0);
        let mut out = Complex64::default();
        for _ in 0..500 {
            out = agc.step(x);
        }
        assert!((agc.gain() - 0.5).abs() < 1e-6);
        assert!((agc.v - 4f64.ln()).abs() < 1e-6);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-3);
        assert!((agc.gain().powi(2) * 4.0 - agc.p_ref).abs() < 1e-3);
    }

    #[test]
    fn unit_power_is_fixed_point() {
        let mut agc = AgcState::default();
        let before = agc;
        let y = agc.step(Complex64::new(0.6, 0.8));
        assert_eq!(agc, before);
        assert_eq!(y, Complex64::new(0.6, 0.8));
    }

    #[test]
    fn power_step_recovers_and_matches_oracle() {
        let mut powers = vec![1.0; 100];
        powers.extend(std::iter::repeat_n(0.25, 300));
        let oracle = scalar_oracle(0.0, &powers, 0.1);
        let mut agc = AgcState::default();
        for (k, &p) in powers.iter().enumerate() {
            let y = agc.step(Complex64::new(0.0, p.sqrt()));
            assert!((y.norm_sqr() - oracle[k]).abs() < 1e-12);
        }
        assert!((oracle.last().unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn signal_and_noise_scaled_identically() {
        let mut a = AgcState {
            v: 0.7,
            ..AgcState::default()
        };
        let g = a.gain();
        let sig = Complex64::new(0.3, -0.1);
        let noise = Complex64::new(-0.05, 0.02);
        let y = a.step(sig + noise);
        assert!((y - (sig * g + noise * g)).norm() < 1e-15);
    }

    #[test]
    fn clamps_integrator() {
        let mut agc = AgcState::new(1e6, 1.0);
        agc.step(Complex64::new(1e3, 0.0));
        assert!(agc.v <= V_CLAMP);
        assert!(agc.gain() > 0.0);
    }
}
