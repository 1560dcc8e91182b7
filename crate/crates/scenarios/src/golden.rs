//! Regression fingerprints: a SHA-256 digest of a run's CSV output plus its
//! per-kind event counts, stored as small text files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sdwsn::metrics::{series_csv, summary_csv};
use sdwsn::sim::{run_with_seed, SimError};
use sha2::{Digest, Sha256};

use crate::catalog::Scenario;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenTrace {
    pub scenario: String,
    pub seed: u64,
    /// Hex SHA-256 of the summary CSV followed by the series CSV.
    pub digest: String,
    pub events: BTreeMap<String, u64>,
}

impl GoldenTrace {
    pub fn capture(scenario: &Scenario) -> Result<Self, SimError> {
        let cfg = scenario.config()?;
        let out = run_with_seed(&cfg, scenario.seed)?;
        let reports = std::slice::from_ref(&out.report);
        let mut hasher = Sha256::new();
        hasher.update(summary_csv(reports));
        hasher.update(series_csv(reports));
        Ok(GoldenTrace {
            scenario: scenario.name.to_string(),
            seed: scenario.seed,
            digest: hex::encode(hasher.finalize()),
            events: out
                .event_counts
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "digest = {}", self.digest);
        for (k, v) in &self.events {
            let _ = writeln!(s, "events.{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut scenario = None;
        let mut seed = None;
        let mut digest = None;
        let mut events = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            match k {
                "scenario" => scenario = Some(v.to_string()),
                "seed" => seed = Some(v.parse().map_err(|e| format!("line {}: {e}", n + 1))?),
                "digest" => digest = Some(v.to_string()),
                _ => {
                    let kind = k
                        .strip_prefix("events.")
                        .ok_or_else(|| format!("line {}: unknown key {k}", n + 1))?;
                    let count = v.parse().map_err(|e| format!("line {}: {e}", n + 1))?;
                    events.insert(kind.to_string(), count);
                }
            }
        }
        Ok(GoldenTrace {
            scenario: scenario.ok_or("missing scenario")?,
            seed: seed.ok_or("missing seed")?,
            digest: digest.ok_or("missing digest")?,
            events,
        })
    }

    /// Human-readable differences against `other`, empty when equal.
    pub fn diff(&self, other: &GoldenTrace) -> Vec<String> {
        let mut out = Vec::new();
        if self.seed != other.seed {
            out.push(format!("seed {} != {}", self.seed, other.seed));
        }
        if self.digest != other.digest {
            out.push(format!("digest {} != {}", self.digest, other.digest));
        }
        let kinds: std::collections::BTreeSet<&String> =
            self.events.keys().chain(other.events.keys()).collect();
        for k in kinds {
            let (a, b) = (self.events.get(k), other.events.get(k));
            if a != b {
                out.push(format!("{k}: {} != {}", a.copied().unwrap_or(0), b.copied().unwrap_or(0)));
            }
        }
        out
    }
}

/// Compares a fresh capture with the stored trace in `dir`. When `bless` is
/// set, or no trace exists yet, the fresh capture is written instead.
pub fn verify_or_bless(dir: &Path, scenario: &Scenario, bless: bool) -> Result<Vec<String>, String> {
    let fresh = GoldenTrace::capture(scenario).map_err(|e| e.to_string())?;
    let path = dir.join(format!("{}.trace", scenario.name));
    if bless || !path.exists() {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        std::fs::write(&path, fresh.to_text()).map_err(|e| e.to_string())?;
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let stored = GoldenTrace::parse(&text)?;
    Ok(stored.diff(&fresh))
}
