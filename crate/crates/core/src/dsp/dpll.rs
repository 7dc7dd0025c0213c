use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::wrap_2pi;

/// DPLL design constants.
///
/// The loop is a type-II loop with filter F(z) = K₁(1 + K₂/(z−1)) and NCO
/// K₀/(z−1). With global gain K = K_d·K₁·K₀ the linearized design formulas are
/// B_L·T = (K + K₂)/4, ξ = ½√(K/K₂), ω_n·T = √(K·K₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopGains {
    pub kd: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub xi: f64,
    pub blt: f64,
    pub wnt: f64,
}

impl LoopGains {
    /// Inverts the design formulas for a damping factor and normalized
    /// loop bandwidth.
    pub fn design(xi: f64, blt: f64, kd: f64, k0: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return invalid(format!("damping factor must be positive, got {xi}"));
        }
        if !(blt > 0.0 && blt < 0.25) {
            return invalid(format!("B_L·T must lie in (0, 0.25), got {blt}"));
        }
        if !(kd > 0.0 && k0 > 0.0) {
            return invalid(format!("K_d and K_0 must be positive, got {kd}, {k0}"));
        }
        let k2 = 4.0 * blt / (1.0 + 4.0 * xi * xi);
        let k = 4.0 * xi * xi * k2;
        let k1 = k / (kd * k0);
        Ok(Self::from_gains(kd, k0, k1, k2))
    }

    /// Builds the gain set from raw K values, deriving (ξ, B_L·T, ω_n·T).
    pub fn from_gains(kd: f64, k0: f64, k1: f64, k2: f64) -> Self {
        let k = kd * k1 * k0;
        Self {
            kd,
            k0,
            k1,
            k2,
            xi: 0.5 * (k / k2).sqrt(),
            blt: 0.25 * (k + k2),
            wnt: (k * k2).sqrt(),
        }
    }

    /// Global loop gain K = K_d·K₁·K₀.
    pub fn loop_gain(&self) -> f64 {
        self.kd * self.k1 * self.k0
    }

    /// Natural angular frequency ω_n in rad/s for a sample period `t_s`.
    pub fn omega_n(&self, t_s: f64) -> f64 {
        self.wnt / t_s
    }
}

/// Phase error detector for BPSK.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseDetector {
    /// ε = I·Q, the low-SNR approximation of the MAP detector.
    #[default]
    Product,
    /// ε = Q·tanh(I).
    Map,
}

impl PhaseDetector {
    #[inline]
    pub fn error(self, s: Complex64) -> f64 {
        match self {
            PhaseDetector::Product => s.re * s.im,
            PhaseDetector::Map => s.im * s.re.tanh(),
        }
    }
}

/// Runtime state of the loop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DpllState {
    /// NCO phase applied to the current sample, wrapped to (−π, π].
    pub nco_phase: f64,
    /// Integral path of the loop filter, rad/sample.
    pub filter_accumulator: f64,
    /// Last filter output u(k) = NCO increment, rad/sample.
    pub last_increment: f64,
}

impl DpllState {
    /// Frequency estimate implied by the last NCO increment.
    pub fn freq_estimate_hz(&self, k0: f64, t_s: f64) -> f64 {
        k0 * self.last_increment / (2.0 * PI * t_s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DpllOutput {
    pub derotated: Complex64,
    pub error: f64,
    /// NCO phase that was applied to this sample.
    pub nco_phase: f64,
}

/// Second-order digital PLL with one sample of feedback delay.
#[derive(Debug, Clone, Copy)]
pub struct Dpll {
    pub gains: LoopGains,
    pub detector: PhaseDetector,
    pub state: DpllState,
}

impl Dpll {
    pub fn new(gains: LoopGains, detector: PhaseDetector) -> Self {
        Self {
            gains,
            detector,
            state: DpllState::default(),
        }
    }

    /// Derotates `x` by the current NCO phase, runs the detector and loop
    /// filter, and advances the NCO for the next sample.
    #[inline]
    pub fn step(&mut self, x: Complex64) -> DpllOutput {
        let st = &mut self.state;
        let phase = st.nco_phase;
        let (s, c) = phase.sin_cos();
        let derotated = x * Complex64::new(c, -s);
        let error = self.detector.error(derotated);
        let k1e = self.gains.k1 * error;
        let u = k1e + st.filter_accumulator;
        st.filter_accumulator += k1e * self.gains.k2;
        st.last_increment = u;
        st.nco_phase = wrap_2pi(phase + self.gains.k0 * u);
        DpllOutput {
            derotated,
            error,
            nco_phase: phase,
        }
    }
}

/// Frequency lock detector: moving average of the NCO frequency over a
/// window, locked once it stays within a tolerance of the target for a
/// minimum hold time.
#[derive(Debug, Clone)]
pub struct LockDetector {
    target_hz: f64,
    tolerance_hz: f64,
    hold: u64,
    hz_per_rad: f64,
    window: Vec<f64>,
    pos: usize,
    filled: bool,
    sum: f64,
    run_start: Option<u64>,
    out_run_start: Option<u64>,
    locked_at: Option<u64>,
    losses: u32,
    index: u64,
    last_hz: f64,
}

impl LockDetector {
    /// `window` and `hold` are in samples; `t_s` is the sample period.
    pub fn new(target_hz: f64, tolerance_hz: f64, window: usize, hold: u64, t_s: f64) -> Self {
        Self {
            target_hz,
            tolerance_hz,
            hold,
            hz_per_rad: 1.0 / (2.0 * PI * t_s),
            window: vec![0.0; window.max(1)],
            pos: 0,
            filled: false,
            sum: 0.0,
            run_start: None,
            out_run_start: None,
            locked_at: None,
            losses: 0,
            index: 0,
            last_hz: 0.0,
        }
    }

    /// Feeds the NCO increment (rad/sample) of the current sample.
    #[inline]
    pub fn push(&mut self, increment: f64) {
        let n = self.window.len();
        self.sum += increment - self.window[self.pos];
        self.window[self.pos] = increment;
        self.pos += 1;
        if self.pos == n {
            self.pos = 0;
            self.filled = true;
            self.sum = self.window.iter().sum();
        }
        let k = self.index;
        self.index += 1;
        if !self.filled {
            return;
        }
        let f = self.sum / n as f64 * self.hz_per_rad;
        self.last_hz = f;
        let inside = (f - self.target_hz).abs() < self.tolerance_hz;
        match self.locked_at {
            None => {
                if inside {
                    let start = *self.run_start.get_or_insert(k);
                    if k + 1 - start >= self.hold {
                        self.locked_at = Some(start);
                    }
                } else {
                    self.run_start = None;
                }
            }
            Some(_) => {
                if inside {
                    self.out_run_start = None;
                } else {
                    let start = *self.out_run_start.get_or_insert(k);
                    if k + 1 - start == self.hold {
                        self.losses += 1;
                    }
                }
            }
        }
    }

    /// Sample index at which the sustained in-band run that declared lock began.
    pub fn locked_at(&self) -> Option<u64> {
        self.locked_at
    }

    /// True once lock has been declared (the hold time has elapsed).
    pub fn is_locked(&self) -> bool {
        self.locked_at.is_some()
    }

    /// Number of sustained out-of-band episodes after lock.
    pub fn losses(&self) -> u32 {
        self.losses
    }

    /// Smoothed frequency estimate (Hz) at the last sample.
    pub fn filtered_hz(&self) -> f64 {
        self.last_hz
    }
}
