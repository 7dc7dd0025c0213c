use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{linear_to_db, wrap_2pi};

const FSOC_MAGIC: &[u8; 4] = b"FSOC";
const FSOC_VERSION: u32 = 1;

/// One AO frame of the channel: relative coupling efficiency and coupling phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFrame {
    /// |C|²/|C_ref|², 1 for the turbulence-free link.
    pub rho_rel: f64,
    /// arg C, wrapped to (−π, π].
    pub phi_rad: f64,
}

/// Time series of (ρ_rel, φ) sampled at the AO frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub frame_rate_hz: f64,
    pub frames: Vec<ChannelFrame>,
}

impl ChannelSeries {
    pub fn new(frame_rate_hz: f64, frames: Vec<ChannelFrame>) -> Result<Self> {
        if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
            return invalid(format!("frame rate must be positive, got {frame_rate_hz}"));
        }
        for (k, f) in frames.iter().enumerate() {
            if !(f.rho_rel >= 0.0 && f.rho_rel.is_finite() && f.phi_rad.is_finite()) {
                return invalid(format!("frame {k} is not a valid (rho, phi) pair: {f:?}"));
            }
        }
        let frames = frames
            .into_iter()
            .map(|f| ChannelFrame {
                rho_rel: f.rho_rel,
                phi_rad: wrap_2pi(f.phi_rad),
            })
            .collect();
        Ok(Self { frame_rate_hz, frames })
    }

    /// Constant channel: `n` frames of (`rho_rel`, `phi`).
    pub fn constant(frame_rate_hz: f64, n: usize, rho_rel: f64, phi: f64) -> Result<Self> {
        Self::new(frame_rate_hz, vec![ChannelFrame { rho_rel, phi_rad: phi }; n])
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.frame_rate_hz
    }

    /// Same series with the phase forced to zero (amplitude-only fading).
    pub fn without_phase(&self) -> Self {
        Self {
            frame_rate_hz: self.frame_rate_hz,
            frames: self
                .frames
                .iter()
                .map(|f| ChannelFrame {
                    rho_rel: f.rho_rel,
                    phi_rad: 0.0,
                })
                .collect(),
        }
    }

    /// Cyclic shift so that frame `offset` comes first.
    pub fn rotated(&self, offset: usize) -> Self {
        let mut frames = self.frames.clone();
        if !frames.is_empty() {
            let k = offset % frames.len();
            frames.rotate_left(k);
        }
        Self {
            frame_rate_hz: self.frame_rate_hz,
            frames,
        }
    }

    /// Phase continued by the nearest multiple of 2π from one frame to the next.
    pub fn unwrapped_phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frames.len());
        let mut prev: Option<f64> = None;
        for f in &self.frames {
            let v = match prev {
                None => f.phi_rad,
                Some(p) => p + wrap_2pi(f.phi_rad - p),
            };
            out.push(v);
            prev = Some(v);
        }
        out
    }

    pub fn mean_rho(&self) -> f64 {
        self.frames.iter().map(|f| f.rho_rel).sum::<f64>() / self.frames.len() as f64
    }

    /// Mean coupling in dB, 10·log10(⟨ρ_rel⟩).
    pub fn mean_coupling_db(&self) -> f64 {
        linear_to_db(self.mean_rho())
    }

    pub fn stats(&self) -> SeriesStats {
        SeriesStats::from_series(self)
    }

    /// Smallest lag at which the phasor coherence |⟨e^{i(φ(t+τ) − φ(t))}⟩|
    /// drops below `level`, in seconds.
    pub fn phase_coherence_time(&self, level: f64) -> Option<f64> {
        let z: Vec<Complex64> = self
            .frames
            .iter()
            .map(|f| Complex64::from_polar(1.0, f.phi_rad))
            .collect();
        let n = z.len();
        for lag in 1..n / 2 {
            let s: Complex64 = z[lag..].iter().zip(&z[..n - lag]).map(|(a, b)| a * b.conj()).sum();
            if s.norm() / ((n - lag) as f64) < level {
                return Some(lag as f64 / self.frame_rate_hz);
            }
        }
        None
    }

    /// Writes the FSOC binary form (little-endian).
    pub fn write_fsoc<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FSOC_MAGIC)?;
        w.write_all(&FSOC_VERSION.to_le_bytes())?;
        w.write_all(&self.frame_rate_hz.to_le_bytes())?;
        w.write_all(&(self.frames.len() as u64).to_le_bytes())?;
        for f in &self.frames {
            w.write_all(&f.rho_rel.to_le_bytes())?;
            w.write_all(&f.phi_rad.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_fsoc<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FSOC_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected FSOC")));
        }
        let version = read_u32(&mut r)?;
        if version != FSOC_VERSION {
            return Err(Error::Format(format!("unsupported FSOC version {version}")));
        }
        let frame_rate_hz = read_f64(&mut r)?;
        let n = read_u64(&mut r)?;
        let mut frames = Vec::with_capacity(n.min(1 << 24) as usize);
        for _ in 0..n {
            let rho_rel = read_f64(&mut r)?;
            let phi_rad = read_f64(&mut r)?;
            frames.push(ChannelFrame { rho_rel, phi_rad });
        }
        Self::new(frame_rate_hz, frames)
    }

    /// CSV with header `t_s,rho_rel,rho_rel_db,phi_rad`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,rho_rel,rho_rel_db,phi_rad")?;
        for (k, f) in self.frames.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                k as f64 / self.frame_rate_hz,
                f.rho_rel,
                linear_to_db(f.rho_rel),
                f.phi_rad
            )?;
        }
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Summary statistics of a channel series (mean, spread, empirical CDF).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesStats {
    pub n_frames: usize,
    pub mean_rho: f64,
    pub mean_db: f64,
    pub var_rho: f64,
    /// Normalized variance of ρ, ⟨ρ²⟩/⟨ρ⟩² − 1.
    pub rho_scintillation: f64,
    pub phi_std_rad: f64,
    /// (threshold dB, P[ρ_dB ≤ threshold]) pairs.
    pub cdf_db: Vec<(f64, f64)>,
}

impl SeriesStats {
    fn from_series(s: &ChannelSeries) -> Self {
        let rho: Vec<f64> = s.frames.iter().map(|f| f.rho_rel).collect();
        let (mean_rho, var_rho) = crate::math::mean_var(&rho);
        let (_, var_phi) = crate::math::mean_var(&s.unwrapped_phase());
        let mut db: Vec<f64> = rho.iter().map(|&r| linear_to_db(r)).collect();
        db.sort_by(|a, b| a.total_cmp(b));
        let n = db.len() as f64;
        let cdf_db = (-40..=5)
            .map(|t| {
                let t = t as f64;
                let count = db.partition_point(|&x| x <= t);
                (t, count as f64 / n)
            })
            .collect();
        Self {
            n_frames: rho.len(),
            mean_rho,
            mean_db: linear_to_db(mean_rho),
            var_rho,
            rho_scintillation: var_rho / (mean_rho * mean_rho),
            phi_std_rad: var_phi.sqrt(),
            cdf_db,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "quantity,value")?;
        writeln!(w, "n_frames,{}", self.n_frames)?;
        writeln!(w, "mean_rho,{}", self.mean_rho)?;
        writeln!(w, "mean_db,{}", self.mean_db)?;
        writeln!(w, "var_rho,{}", self.var_rho)?;
        writeln!(w, "rho_scintillation,{}", self.rho_scintillation)?;
        writeln!(w, "phi_std_rad,{}", self.phi_std_rad)?;
        writeln!(w)?;
        writeln!(w, "threshold_db,cdf")?;
        for (t, p) in &self.cdf_db {
            writeln!(w, "{t},{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_frames() {
        assert!(ChannelSeries::new(0.0, vec![]).is_err());
        let bad = ChannelFrame {
            rho_rel: -1.0,
            phi_rad: 0.0,
        };
        assert!(ChannelSeries::new(5e3, vec![bad]).is_err());
    }

    #[test]
    fn phase_is_stored_wrapped_and_unwraps() {
        let frames: Vec<_> = (0..50)
            .map(|k| ChannelFrame {
                rho_rel: 1.0,
                phi_rad: 0.3 * k as f64,
            })
            .collect();
        let s = ChannelSeries::new(5e3, frames).unwrap();
        assert!(s.frames.iter().all(|f| f.phi_rad > -PI && f.phi_rad <= PI));
        let u = s.unwrapped_phase();
        for (k, v) in u.iter().enumerate() {
            assert!((v - 0.3 * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn fsoc_round_trip_is_byte_identical() {
        let frames: Vec<_> = (0..17)
            .map(|k| ChannelFrame {
                rho_rel: 0.1 + k as f64 * 0.01,
                phi_rad: (k as f64 * 0.7).sin(),
            })
            .collect();
        let s = ChannelSeries::new(5e3, frames).unwrap();
        let mut a = Vec::new();
        s.write_fsoc(&mut a).unwrap();
        assert_eq!(&a[..4], b"FSOC");
        assert_eq!(a.len(), 4 + 4 + 8 + 8 + 17 * 16);
        let back = ChannelSeries::read_fsoc(a.as_slice()).unwrap();
        let mut b = Vec::new();
        back.write_fsoc(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fsoc_rejects_wrong_magic() {
        let bytes = b"FSOF\x01\x00\x00\x00".to_vec();
        assert!(matches!(
            ChannelSeries::read_fsoc(bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn stats_of_constant_series() {
        let s = ChannelSeries::constant(5e3, 10, 1.0, 0.0).unwrap();
        let st = s.stats();
        assert_eq!(st.mean_db, 0.0);
        assert_eq!(st.var_rho, 0.0);
        assert_eq!(st.cdf_db.last().unwrap().1, 1.0);
    }
}
