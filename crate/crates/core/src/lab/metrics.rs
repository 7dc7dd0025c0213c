use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// Outcome of the acquisition phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acquisition {
    Locked { time_s: f64 },
    NoLock,
}

impl Acquisition {
    pub fn time_s(&self) -> Option<f64> {
        match *self {
            Acquisition::Locked { time_s } => Some(time_s),
            Acquisition::NoLock => None,
        }
    }
}

impl Serialize for Acquisition {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Acquisition::Locked { time_s } => s.serialize_f64(time_s),
            Acquisition::NoLock => s.serialize_str("no-lock"),
        }
    }
}

impl<'de> Deserialize<'de> for Acquisition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Acquisition;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a time in seconds or \"no-lock\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Acquisition, E> {
                Ok(Acquisition::Locked { time_s: v })
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Acquisition, E> {
                Ok(Acquisition::Locked { time_s: v as f64 })
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Acquisition, E> {
                Ok(Acquisition::Locked { time_s: v as f64 })
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Acquisition, E> {
                if v == "no-lock" {
                    Ok(Acquisition::NoLock)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Bit error count with a 95% Clopper–Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
    pub estimate: f64,
    pub ci95: [f64; 2],
}

impl BerEstimate {
    pub fn new(errors: u64, bits: u64) -> Self {
        let estimate = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        Self {
            errors,
            bits,
            estimate,
            ci95: clopper_pearson(errors, bits, 0.05),
        }
    }

    /// Whether two 95% intervals overlap.
    pub fn overlaps(&self, other: &BerEstimate) -> bool {
        self.ci95[0] <= other.ci95[1] && other.ci95[0] <= self.ci95[1]
    }
}

/// Exact binomial confidence interval at level 1 − `alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let q = alpha / 2.0;
    let nf = n as f64;
    let lo = if k == 0 {
        0.0
    } else if k == n {
        q.powf(1.0 / nf)
    } else {
        beta_quantile(k as f64, (n - k + 1) as f64, q)
    };
    let hi = if k == n {
        1.0
    } else if k == 0 {
        1.0 - q.powf(1.0 / nf)
    } else {
        beta_quantile((k + 1) as f64, (n - k) as f64, 1.0 - q)
    };
    [lo, hi]
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta
/// function, searched in log space around the mean.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (f64::MIN_POSITIVE.ln(), 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid.exp()) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Closed-form references attached to a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub crb: f64,
    pub bpsk_as_written: f64,
    pub bpsk_penalty: f64,
    pub pull_in_time_s: f64,
    pub ber_theory: f64,
}

/// Result of one receiver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub esn0_db: f64,
    pub delta_f_hz: f64,
    pub n_samples: u64,
    pub acquisition_time_s: Acquisition,
    /// Sustained out-of-band episodes after lock was declared.
    pub lock_losses: u32,
    /// Post-acquisition phase-error variance (rad²); `None` without lock.
    pub phase_error_variance_rad2: Option<f64>,
    pub variance_samples: u64,
    pub predicted: Predicted,
    pub ber: BerEstimate,
    pub mean_coupling_db: f64,
    /// Normalized variance of ρ_rel over the channel series.
    pub scintillation_index: f64,
}

impl MetricsReport {
    /// Locked within the run and never lost lock afterwards.
    pub fn stable_lock(&self) -> bool {
        matches!(self.acquisition_time_s, Acquisition::Locked { .. }) && self.lock_losses == 0
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report(acq: Acquisition) -> MetricsReport {
        MetricsReport {
            esn0_db: 8.0,
            delta_f_hz: 1e8,
            n_samples: 20_000_000,
            acquisition_time_s: acq,
            lock_losses: 0,
            phase_error_variance_rad2: Some(8.123_456_789e-5),
            variance_samples: 5_000_000,
            predicted: Predicted {
                crb: 7.92e-5,
                bpsk_as_written: 7.34e-5,
                bpsk_penalty: 8.55e-5,
                pull_in_time_s: 1.33e-3,
                ber_theory: 1e-4,
            },
            ber: BerEstimate::new(17, 1_000_000),
            mean_coupling_db: -0.1,
            scintillation_index: 0.1 / 3.0,
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        for acq in [Acquisition::Locked { time_s: 1.4123e-3 }, Acquisition::NoLock] {
            let r = sample_report(acq);
            let back = MetricsReport::from_json(&r.to_json().unwrap()).unwrap();
            assert_eq!(r, back);
        }
        let js = sample_report(Acquisition::NoLock).to_json().unwrap();
        assert!(js.contains("\"no-lock\""));
    }

    #[test]
    fn ber_estimate_is_ratio_and_ci_brackets_it() {
        let b = BerEstimate::new(17, 1_000_000);
        assert_eq!(b.estimate, 17.0 / 1e6);
        assert!(b.ci95[0] < b.estimate && b.estimate < b.ci95[1]);
        let z = BerEstimate::new(0, 1000);
        assert_eq!(z.ci95[0], 0.0);
        assert!((z.ci95[1] - 0.003_682).abs() < 1e-5);
        let big = BerEstimate::new(1000, 30_000_000);
        assert!(big.ci95[0] < big.estimate && big.estimate < big.ci95[1]);
        assert!((big.ci95[1] - big.ci95[0]) / big.estimate < 0.2);
    }
}
