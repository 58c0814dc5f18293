//! File formats: measured Fock distributions (JSON/CSV rows of
//! n, P_n, sigma), drive pulses (JSON with explicit units and frame), and
//! readout traces (CSV of t_us, p_e, sigma). All writes go through a
//! temp-file rename so readers never observe partial files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::control::Pulse;
use crate::error::{FockError, Result};
use crate::hilbert::FockDistribution;

/// A measured phonon-number distribution with per-entry uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredDistribution {
    pub rows: Vec<DistributionRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub n: usize,
    pub p: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl MeasuredDistribution {
    pub fn new(probs: &[f64], sigma: &[f64]) -> Result<Self> {
        if probs.len() != sigma.len() {
            return Err(FockError::DimensionMismatch {
                expected: probs.len(),
                got: sigma.len(),
            });
        }
        let rows = probs
            .iter()
            .zip(sigma)
            .enumerate()
            .map(|(n, (&p, &s))| DistributionRow { n, p, sigma: s })
            .collect();
        let out = Self { rows };
        out.distribution()?; // validate probabilities
        Ok(out)
    }

    /// Probabilities ordered by Fock index; fails on gaps, duplicates or an
    /// invalid distribution.
    pub fn distribution(&self) -> Result<FockDistribution> {
        let mut probs = vec![f64::NAN; self.rows.len()];
        for row in &self.rows {
            if row.n >= probs.len() || !probs[row.n].is_nan() {
                return Err(FockError::Parse(format!(
                    "Fock indices must be 0..{} without repeats; saw {}",
                    probs.len() - 1,
                    row.n
                )));
            }
            probs[row.n] = row.p;
        }
        FockDistribution::new(probs)
    }

    pub fn sigmas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for row in &self.rows {
            if row.n < out.len() {
                out[row.n] = row.sigma;
            }
        }
        out
    }
}

/// Write `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir)?;
    tmp.1.write_all(content)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    fs::rename(&tmp.0, path)?;
    Ok(())
}

fn tempfile_in(dir: &Path) -> Result<(std::path::PathBuf, fs::File)> {
    for k in 0..1000 {
        let candidate = dir.join(format!(
            ".tmp-{}-{k}",
            std::process::id(),
        ));
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&candidate)
        {
            Ok(f) => return Ok((candidate, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(FockError::Io(std::io::Error::other(
        "could not create a temporary file",
    )))
}

pub fn read_distribution_json(path: &Path) -> Result<MeasuredDistribution> {
    let text = fs::read_to_string(path)?;
    let parsed: MeasuredDistribution = serde_json::from_str(&text)
        .map_err(|e| FockError::Parse(format!("{}: {e}", path.display())))?;
    parsed.distribution()?;
    Ok(parsed)
}

pub fn write_distribution_json(path: &Path, dist: &MeasuredDistribution) -> Result<()> {
    let text = serde_json::to_string_pretty(dist)
        .map_err(|e| FockError::Parse(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_distribution_csv(path: &Path) -> Result<MeasuredDistribution> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (k, record) in reader.deserialize::<DistributionRow>().enumerate() {
        let row = record.map_err(|e| {
            FockError::Parse(format!("{} line {}: {e}", path.display(), k + 2))
        })?;
        rows.push(row);
    }
    let out = MeasuredDistribution { rows };
    out.distribution()?;
    Ok(out)
}

pub fn write_distribution_csv(path: &Path, dist: &MeasuredDistribution) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &dist.rows {
        writer
            .serialize(row)
            .map_err(|e| FockError::Parse(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| FockError::Parse(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Auto-detect JSON vs CSV from the extension.
pub fn read_distribution(path: &Path) -> Result<MeasuredDistribution> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_distribution_json(path),
        Some("csv") => read_distribution_csv(path),
        other => Err(FockError::Parse(format!(
            "unsupported distribution format {other:?}; expected .json or .csv"
        ))),
    }
}

/// On-disk pulse schema with explicit units and frame tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseFile {
    pub dt_ns: f64,
    pub samples: Vec<IqSample>,
    pub amplitude_units: String,
    pub frame: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqSample {
    pub i: f64,
    pub q: f64,
}

impl PulseFile {
    pub fn from_pulse(pulse: &Pulse) -> Self {
        Self {
            dt_ns: pulse.dt * 1e9,
            samples: pulse
                .samples
                .iter()
                .map(|z| IqSample { i: z.re, q: z.im })
                .collect(),
            amplitude_units: "rad_per_s".into(),
            frame: "rotating_at_omega_a".into(),
        }
    }

    pub fn to_pulse(&self) -> Result<Pulse> {
        if self.amplitude_units != "rad_per_s" {
            return Err(FockError::Parse(format!(
                "unsupported amplitude units {:?}",
                self.amplitude_units
            )));
        }
        Pulse::new(
            self.dt_ns * 1e-9,
            self.samples.iter().map(|s| C64::new(s.i, s.q)).collect(),
        )
    }
}

pub fn write_pulse_json(path: &Path, pulse: &Pulse) -> Result<()> {
    let text = serde_json::to_string_pretty(&PulseFile::from_pulse(pulse))
        .map_err(|e| FockError::Parse(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_pulse_json(path: &Path) -> Result<Pulse> {
    let text = fs::read_to_string(path)?;
    let parsed: PulseFile = serde_json::from_str(&text)
        .map_err(|e| FockError::Parse(format!("{}: {e}", path.display())))?;
    parsed.to_pulse()
}

/// One point of a readout trace: interaction time in microseconds, qubit
/// excited population, and its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpnSample {
    pub t_us: f64,
    pub p_e: f64,
    #[serde(default)]
    pub sigma: f64,
}

pub fn write_rpn_csv(path: &Path, samples: &[RpnSample]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for s in samples {
        writer
            .serialize(s)
            .map_err(|e| FockError::Parse(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| FockError::Parse(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_rpn_csv(path: &Path) -> Result<Vec<RpnSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (k, record) in reader.deserialize::<RpnSample>().enumerate() {
        let sample = record.map_err(|e| {
            FockError::Parse(format!("{} line {}: {e}", path.display(), k + 2))
        })?;
        out.push(sample);
    }
    if out.windows(2).any(|w| w[1].t_us <= w[0].t_us) {
        return Err(FockError::Parse(
            "readout trace times must be strictly ascending".into(),
        ));
    }
    Ok(out)
}
