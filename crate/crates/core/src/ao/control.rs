//! Modal integrator with a pure measurement delay.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::basis::ZernikeBasis;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoLoopConfig {
    pub frame_rate_hz: f64,
    pub delay_frames: usize,
    pub integrator_gain: f64,
    pub n_modes: usize,
    pub correct_piston: bool,
}

impl Default for AoLoopConfig {
    fn default() -> Self {
        Self {
            frame_rate_hz: 5000.0,
            delay_frames: 2,
            integrator_gain: 0.5,
            n_modes: 91,
            correct_piston: false,
        }
    }
}

impl AoLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay_frames < 1 {
            return invalid("AO loop delay must be at least one frame");
        }
        if !(self.integrator_gain > 0.0 && self.integrator_gain < 1.0) {
            return invalid(format!(
                "integrator gain must lie in (0, 1), got {}",
                self.integrator_gain
            ));
        }
        if self.n_modes < 1 {
            return invalid("AO loop needs at least one mode");
        }
        if !(self.frame_rate_hz > 0.0) {
            return invalid("frame rate must be positive");
        }
        Ok(())
    }
}

/// Streaming closed loop: c(k) = c(k−1) + g·a_meas(k − delay), where a_meas
/// is the modal projection of the residual at that frame.
#[derive(Debug, Clone)]
pub struct AoLoop<'a> {
    basis: &'a ZernikeBasis,
    config: AoLoopConfig,
    command: Vec<f64>,
    pending: VecDeque<Vec<f64>>,
}

impl<'a> AoLoop<'a> {
    pub fn new(basis: &'a ZernikeBasis, config: AoLoopConfig) -> Result<Self> {
        config.validate()?;
        if config.n_modes > basis.n_modes() {
            return invalid(format!(
                "loop corrects {} modes but the basis holds {}",
                config.n_modes,
                basis.n_modes()
            ));
        }
        Ok(Self {
            command: vec![0.0; basis.n_modes()],
            pending: VecDeque::with_capacity(config.delay_frames + 1),
            basis,
            config,
        })
    }

    pub fn command(&self) -> &[f64] {
        &self.command
    }

    /// Advances one frame with the turbulent phase sampled on the pupil
    /// pixels. Returns the applied correction on the pupil pixels.
    pub fn step_pupil(&mut self, turbulent: &[f64]) -> Result<Vec<f64>> {
        if self.pending.len() == self.config.delay_frames {
            let meas = self.pending.pop_front().expect("queue is full");
            let first = if self.config.correct_piston { 0 } else { 1 };
            let n = self.config.n_modes;
            for (c, m) in self.command[first..n].iter_mut().zip(&meas[first..n]) {
                *c += self.config.integrator_gain * m;
            }
        }
        let correction = self.basis.reconstruct_pupil(&self.command)?;
        let residual: Vec<f64> = turbulent.iter().zip(&correction).map(|(t, c)| t - c).collect();
        self.pending.push_back(self.basis.decompose_pupil(&residual)?);
        Ok(correction)
    }
}

/// Residual phase maps φ_res(k) = φ_tur(k) − φ_AO(k) for full `n × n`
/// turbulent maps, zero outside the pupil.
pub fn ao_closed_loop(frames: &[Vec<f64>], basis: &ZernikeBasis, config: &AoLoopConfig) -> Result<Vec<Vec<f64>>> {
    if frames.len() < config.delay_frames {
        return invalid(format!(
            "{} frames is fewer than the {}-frame loop delay",
            frames.len(),
            config.delay_frames
        ));
    }
    let mut ao = AoLoop::new(basis, config.clone())?;
    frames
        .iter()
        .map(|f| {
            let tur = basis.gather(f)?;
            let cor = ao.step_pupil(&tur)?;
            let res: Vec<f64> = tur.iter().zip(&cor).map(|(t, c)| t - c).collect();
            Ok(basis.scatter(&res))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configs() {
        let b = ZernikeBasis::new(6, 32, 0.01, 0.2).unwrap();
        for cfg in [
            AoLoopConfig {
                delay_frames: 0,
                ..Default::default()
            },
            AoLoopConfig {
                integrator_gain: 1.0,
                ..Default::default()
            },
            AoLoopConfig {
                n_modes: 0,
                ..Default::default()
            },
        ] {
            assert!(AoLoop::new(&b, cfg).is_err());
        }
        assert!(AoLoop::new(&b, AoLoopConfig::default()).is_err());
        let ok = AoLoopConfig {
            n_modes: 6,
            ..Default::default()
        };
        assert!(ao_closed_loop(&[vec![0.0; 32 * 32]], &b, &ok).is_err());
    }

    #[test]
    fn zero_input_zero_residual() {
        let b = ZernikeBasis::new(10, 32, 0.01, 0.2).unwrap();
        let cfg = AoLoopConfig {
            n_modes: 10,
            ..Default::default()
        };
        let res = ao_closed_loop(&vec![vec![0.0; 32 * 32]; 5], &b, &cfg).unwrap();
        assert!(res.iter().flatten().all(|&v| v == 0.0));
    }
}
