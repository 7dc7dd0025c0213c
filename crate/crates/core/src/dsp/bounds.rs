//! Closed-form loop and link figures used as references for the simulation.

use serde::{Deserialize, Serialize};

use crate::math::q_function;

/// Analog-loop pull-in time T_p = 2Δω²/(ξ·ω_n³), in seconds.
pub fn pull_in_time(delta_omega: f64, xi: f64, omega_n: f64) -> f64 {
    2.0 * delta_omega * delta_omega / (xi * omega_n.powi(3))
}

/// Steady-state phase-error variance references (rad²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBounds {
    /// Cramér–Rao bound B_L·T / (E_s/N₀).
    pub crb: f64,
    /// CRB × 2x/(2x+1), the squaring-loss expression exactly as commonly
    /// printed; it lies below the CRB.
    pub bpsk_as_written: f64,
    /// CRB × (2x+1)/(2x), the conventional squaring-loss penalty; above the CRB.
    pub bpsk_penalty: f64,
}

/// Variance references for normalized bandwidth `blt` and linear E_s/N₀ `x`.
pub fn loop_variance_bounds(blt: f64, esn0: f64) -> VarianceBounds {
    let crb = blt / esn0;
    let two_x = 2.0 * esn0;
    VarianceBounds {
        crb,
        bpsk_as_written: crb * two_x / (two_x + 1.0),
        bpsk_penalty: crb * (two_x + 1.0) / two_x,
    }
}

/// Bit error probability of differentially encoded BPSK with coherent
/// detection and differential decoding over AWGN: 2·Q(√(2x))·(1 − Q(√(2x))).
pub fn debpsk_ber_theory(esn0: f64) -> f64 {
    let p = q_function((2.0 * esn0.max(0.0)).sqrt());
    2.0 * p * (1.0 - p)
}

/// E_s/N₀ (linear) at which [`debpsk_ber_theory`] reaches `ber`, by bisection in dB.
pub fn debpsk_required_esn0_db(ber: f64) -> f64 {
    let (mut lo, mut hi) = (-20.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if debpsk_ber_theory(crate::math::db_to_linear(mid)) > ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
