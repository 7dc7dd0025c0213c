//! SNR sweeps over independent seeds.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use super::receiver::{run_link, ReceiverConfig, RunOptions};
use crate::coupling::ChannelSeries;
use crate::dsp::LinkParams;
use crate::error::{invalid, Result};

/// One (SNR, seed) point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub seed: u64,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Runs every SNR in `snr_db` for seeds `base_seed..base_seed + seeds`,
/// in parallel. Failed runs are kept as rows carrying the error message.
pub fn sweep_snr(
    series: &ChannelSeries,
    base: &LinkParams,
    rx: &ReceiverConfig,
    snr_db: &[f64],
    n_samples: u64,
    base_seed: u64,
    seeds: u32,
) -> Result<Vec<SweepRow>> {
    if snr_db.len() < 2 {
        return invalid("a sweep needs at least two SNR points");
    }
    let jobs: Vec<(f64, u64)> = snr_db
        .iter()
        .flat_map(|&s| (0..seeds as u64).map(move |k| (s, base_seed + k)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(snr, seed)| {
            let params = LinkParams {
                esn0_avg_db: snr,
                ..*base
            };
            match run_link(series, &params, rx, &RunOptions::new(n_samples, seed)) {
                Ok(r) => SweepRow {
                    snr_db: snr,
                    seed,
                    report: Some(r),
                    error: None,
                },
                Err(e) => SweepRow {
                    snr_db: snr,
                    seed,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

pub const SWEEP_CSV_HEADER: &str = "snr_db,seed,acquisition_s,lock_losses,variance,variance_samples,crb,bpsk_as_written,bpsk_penalty,ber,ber_ci_lo,ber_ci_hi,errors,bits,ber_theory,error";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        match (&row.report, &row.error) {
            (Some(r), _) => writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                row.snr_db,
                row.seed,
                opt(r.acquisition_time_s.time_s()),
                r.lock_losses,
                opt(r.phase_error_variance_rad2),
                r.variance_samples,
                r.predicted.crb,
                r.predicted.bpsk_as_written,
                r.predicted.bpsk_penalty,
                r.ber.estimate,
                r.ber.ci95[0],
                r.ber.ci95[1],
                r.ber.errors,
                r.ber.bits,
                r.predicted.ber_theory,
            )?,
            (None, e) => writeln!(
                w,
                "{},{},,,,,,,,,,,,,,{}",
                row.snr_db,
                row.seed,
                e.as_deref().unwrap_or("unknown").replace(',', ";")
            )?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::channel::constant_channel;

    #[test]
    fn noiseless_sweep_has_no_errors() {
        let series = constant_channel(5000.0, 4).unwrap();
        let base = LinkParams {
            delta_f_hz: 0.0,
            ..LinkParams::default()
        };
        let mut rx = ReceiverConfig::default();
        rx.lock.window_samples = 1000;
        rx.lock.hold_s = 1e-6;
        let rows = sweep_snr(&series, &base, &rx, &[f64::INFINITY, f64::INFINITY], 60_000, 3, 2).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            let rep = r.report.as_ref().unwrap();
            assert_eq!(rep.ber.errors, 0);
            assert!(rep.ber.bits > 0);
        }
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn single_point_rejected() {
        let series = constant_channel(5000.0, 1).unwrap();
        assert!(sweep_snr(
            &series,
            &LinkParams::default(),
            &ReceiverConfig::default(),
            &[8.0],
            10,
            0,
            1
        )
        .is_err());
    }
}
