use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::metrics::{Acquisition, BerEstimate, MetricsReport, Predicted};
use super::stats::RunningVariance;
use crate::coupling::ChannelSeries;
use crate::dsp::{
    debpsk_ber_theory, loop_variance_bounds, pull_in_time, AgcState, BitSource, DifferentialDecoder, Dpll, LinkParams,
    LockDetector, LoopGains, PhaseDetector, SampleStream,
};
use crate::error::Result;
use crate::math::{db_to_linear, wrap_pi};

/// Lock detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LockConfig {
    /// Moving-average length applied to the NCO frequency, samples.
    pub window_samples: usize,
    pub tolerance_hz: f64,
    /// Time the smoothed frequency must stay in band, seconds.
    pub hold_s: f64,
}

impl Default for LockConfig {
    fn default() -> Self {
        Self {
            window_samples: 10_000,
            tolerance_hz: 1e6,
            hold_s: 1e-4,
        }
    }
}

/// Receiver design parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverConfig {
    pub xi: f64,
    pub blt: f64,
    pub kd: f64,
    pub k0: f64,
    pub g0: f64,
    pub p_ref: f64,
    pub agc: bool,
    pub detector: PhaseDetector,
    pub lock: LockConfig,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            xi: std::f64::consts::FRAC_1_SQRT_2,
            blt: 5e-4,
            kd: 1.0,
            k0: 1.0,
            g0: 0.1,
            p_ref: 1.0,
            agc: true,
            detector: PhaseDetector::Product,
            lock: LockConfig::default(),
        }
    }
}

impl ReceiverConfig {
    pub fn gains(&self) -> Result<LoopGains> {
        LoopGains::design(self.xi, self.blt, self.kd, self.k0)
    }
}

/// Per-run options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub n_samples: u64,
    pub seed: u64,
    pub bits: BitSource,
    /// Stop as soon as lock is declared (acquisition-only runs).
    pub stop_at_lock: bool,
    /// Stop at the first loss of lock.
    pub stop_at_loss: bool,
}

impl RunOptions {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            bits: BitSource::Random,
            stop_at_lock: false,
            stop_at_loss: false,
        }
    }
}

/// Per-sample trace handed to an observer.
#[derive(Debug, Clone, Copy)]
pub struct SampleTrace {
    pub index: u64,
    pub output: Complex64,
    pub nco_phase: f64,
    pub f_est_hz: f64,
    pub true_phase: f64,
}

/// Runs AGC → DPLL → detector over a synthesized stream.
pub fn run_link(
    series: &ChannelSeries,
    params: &LinkParams,
    rx: &ReceiverConfig,
    opts: &RunOptions,
) -> Result<MetricsReport> {
    run_link_traced(series, params, rx, opts, |_| {})
}

/// [`run_link`] with an observer called for every sample.
pub fn run_link_traced<F: FnMut(&SampleTrace)>(
    series: &ChannelSeries,
    params: &LinkParams,
    rx: &ReceiverConfig,
    opts: &RunOptions,
    mut observe: F,
) -> Result<MetricsReport> {
    let gains = rx.gains()?;
    let t_s = 1.0 / params.symbol_rate_hz;
    let stream = SampleStream::new(series, params, opts.bits.clone(), opts.seed)?;
    let mut agc = AgcState::new(rx.g0, rx.p_ref);
    let mut pll = Dpll::new(gains, rx.detector);
    let hold = (rx.lock.hold_s * params.symbol_rate_hz).round() as u64;
    let mut lock = LockDetector::new(
        params.delta_f_hz,
        rx.lock.tolerance_hz,
        rx.lock.window_samples,
        hold,
        t_s,
    );
    let mut decoder = DifferentialDecoder::default();
    let mut var = RunningVariance::default();
    let (mut errors, mut bits) = (0u64, 0u64);
    let hz_per_rad = gains.k0 / (2.0 * PI * t_s);

    for x in stream.take(opts.n_samples as usize) {
        let y = if rx.agc { agc.step(x.sample) } else { x.sample };
        let out = pll.step(y);
        lock.push(pll.state.last_increment);
        let rx_bit = decoder.decode(u8::from(out.derotated.re < 0.0));
        if lock.is_locked() {
            if opts.stop_at_lock || (opts.stop_at_loss && lock.losses() > 0) {
                break;
            }
            var.push(wrap_pi(out.nco_phase - x.true_phase));
            bits += 1;
            errors += u64::from(rx_bit != x.tx_bit);
        }
        observe(&SampleTrace {
            index: x.index,
            output: out.derotated,
            nco_phase: out.nco_phase,
            f_est_hz: pll.state.last_increment * hz_per_rad,
            true_phase: x.true_phase,
        });
    }

    let esn0 = db_to_linear(params.esn0_avg_db);
    let bounds = loop_variance_bounds(rx.blt, esn0);
    let stats = series.stats();
    Ok(MetricsReport {
        esn0_db: params.esn0_avg_db,
        delta_f_hz: params.delta_f_hz,
        n_samples: opts.n_samples,
        acquisition_time_s: match lock.locked_at() {
            Some(k) => Acquisition::Locked { time_s: k as f64 * t_s },
            None => Acquisition::NoLock,
        },
        lock_losses: lock.losses(),
        phase_error_variance_rad2: (var.count() > 0).then(|| var.variance()),
        variance_samples: var.count(),
        predicted: Predicted {
            crb: bounds.crb,
            bpsk_as_written: bounds.bpsk_as_written,
            bpsk_penalty: bounds.bpsk_penalty,
            pull_in_time_s: pull_in_time(2.0 * PI * params.delta_f_hz.abs(), gains.xi, gains.omega_n(t_s)),
            ber_theory: debpsk_ber_theory(esn0),
        },
        ber: BerEstimate::new(errors, bits),
        mean_coupling_db: stats.mean_db,
        scintillation_index: stats.rho_scintillation,
    })
}
