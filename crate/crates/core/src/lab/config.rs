//! TOML experiment configuration with Table I / Table II defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::channel::ScenarioConfig;
use super::receiver::ReceiverConfig;
use crate::dsp::{LinkParams, PhaseInterpolation};
use crate::error::{Error, Result};

/// Symbol-stream settings for `link` and `sweep` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub symbol_rate_hz: f64,
    pub delta_f_hz: f64,
    pub esn0_db: f64,
    /// SNR points for sweeps, dB.
    pub sweep_db: Vec<f64>,
    /// Stream length; samples = duration · symbol rate.
    pub duration_s: f64,
    pub seed: u64,
    /// Independent seeds per sweep point.
    pub seeds: u32,
    /// Symbols per channel frame; unset means symbol_rate / frame_rate.
    pub symbols_per_frame: Option<u64>,
    pub interpolation: PhaseInterpolation,
    /// Channel series to replay (FSOC); unset means constant amplitude.
    pub channel_file: Option<PathBuf>,
    /// Drop φ(t) from the channel and keep only ρ(t).
    pub amplitude_only: bool,
    pub sample_budget: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            symbol_rate_hz: 1e10,
            delta_f_hz: 1e8,
            esn0_db: 8.0,
            sweep_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0],
            duration_s: 3e-3,
            seed: 1,
            seeds: 1,
            symbols_per_frame: None,
            interpolation: PhaseInterpolation::Linear,
            channel_file: None,
            amplitude_only: false,
            sample_budget: 500_000_000,
        }
    }
}

impl LinkConfig {
    pub fn n_samples(&self) -> u64 {
        (self.duration_s * self.symbol_rate_hz).round() as u64
    }

    pub fn params(&self, esn0_db: f64) -> LinkParams {
        LinkParams {
            symbol_rate_hz: self.symbol_rate_hz,
            delta_f_hz: self.delta_f_hz,
            esn0_avg_db: esn0_db,
            symbols_per_frame: self.symbols_per_frame,
            interpolation: self.interpolation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a per-sample CSV trace for single runs.
    pub dump_samples: bool,
    /// Keep every n-th sample in the trace.
    pub dump_stride: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_samples: false,
            dump_stride: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub link: LinkConfig,
    pub receiver: ReceiverConfig,
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets a dotted key such as `link.esn0_db` from a TOML literal; bare
    /// words are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut tree = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = parse_literal(value);
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts
            .pop()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Config(format!("empty key '{key}'")))?;
        let mut node = &mut tree;
        for p in parts {
            node = node
                .entry(p)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("'{p}' in '{key}' is not a section")))?;
        }
        node.insert(last.to_string(), parsed);
        let text = toml::to_string(&tree).map_err(|e| Error::Config(e.to_string()))?;
        let next: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        let round = toml::Table::try_from(&next).map_err(|e| Error::Config(e.to_string()))?;
        if !has_key(&round, key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let l = &self.link;
        if !(l.symbol_rate_hz > 0.0) {
            return bad(format!(
                "link.symbol_rate_hz must be positive, got {}",
                l.symbol_rate_hz
            ));
        }
        if !(l.delta_f_hz.abs() < 0.5 * l.symbol_rate_hz) {
            return bad("link.delta_f_hz must stay below half the symbol rate".into());
        }
        if !(l.duration_s > 0.0) {
            return bad("link.duration_s must be positive".into());
        }
        if l.n_samples() > l.sample_budget {
            return Err(Error::SampleBudget {
                requested: l.n_samples(),
                budget: l.sample_budget,
            });
        }
        if l.seeds == 0 {
            return bad("link.seeds must be at least 1".into());
        }
        self.scenario
            .optics
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.scenario.ao.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.receiver.gains().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn has_key(tree: &toml::Table, key: &str) -> bool {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        match node.get(*p) {
            Some(toml::Value::Table(t)) if i + 1 < parts.len() => node = t,
            Some(_) if i + 1 == parts.len() => return true,
            _ => return false,
        }
    }
    false
}

fn parse_literal(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}
