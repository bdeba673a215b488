//! Experiment configuration: parsing, validation and hashing.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{self, BenchmarkSpec, DataError, DataTable, Schema};
use crate::degrade::MAX_MISSINGNESS_RATE;
use crate::metrics::Metric;
use crate::models::ModelSpec;
use crate::privacy::PostProcessing;
use crate::synth::SynthesizerSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Aggregate confusion matrices under differential privacy.
    A,
    /// Individual-level data plus model queries.
    B,
    /// Individual-level data plus model replication from its specification.
    C,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisparityMode {
    #[default]
    Natural,
    /// Positive-prediction rows relabeled towards the underprivileged group.
    Skewed,
}

impl DisparityMode {
    pub fn label(&self) -> &'static str {
        match self {
            DisparityMode::Natural => "natural",
            DisparityMode::Skewed => "skewed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Benchmark(BenchmarkSpec),
    Csv { path: PathBuf, schema: Schema },
}

impl DatasetSource {
    /// Loads or generates the table; CSV paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<DataTable, DataError> {
        match self {
            DatasetSource::Benchmark(spec) => dataset::generate_benchmark(spec),
            DatasetSource::Csv { path, schema } => dataset::load_csv(base_dir.join(path), schema),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            DatasetSource::Benchmark(s) => s.n_numeric_features + s.n_categorical_features,
            DatasetSource::Csv { schema, .. } => schema.feature_columns.len(),
        }
    }
}

/// Degradation grids. Subsample entries up to 1 are fractions, larger
/// entries are row counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default)]
    pub subsample: Vec<f64>,
    /// Cumulative counts of the weakest features to remove.
    #[serde(default)]
    pub features: Vec<usize>,
    /// Cumulative counts of the strongest features to remove.
    #[serde(default)]
    pub features_strongest: Vec<usize>,
    #[serde(default)]
    pub missingness: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub synthesizers: Vec<SynthesizerSpec>,
}

impl Grids {
    pub fn is_empty(&self) -> bool {
        self.subsample.is_empty()
            && self.features.is_empty()
            && self.features_strongest.is_empty()
            && self.missingness.is_empty()
            && self.epsilon.is_empty()
            && self.synthesizers.is_empty()
    }
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_repetitions() -> usize {
    100
}
fn default_bootstrap() -> usize {
    500
}
fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub model: ModelSpec,
    pub scenario: Scenario,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub disparity_mode: DisparityMode,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_bootstrap", rename = "bootstrap_B")]
    pub bootstrap_b: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub post_processing: PostProcessing,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// One message per violated invariant; empty when the config is valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.grids;
        let compat = |out: &mut Vec<String>, key: &str, allowed: &str| {
            out.push(format!(
                "grids.{key} is not compatible with scenario {} (scenario/experiment compatibility matrix allows it only with {allowed})",
                self.scenario
            ));
        };
        if self.scenario == Scenario::A {
            if g.epsilon.is_empty() {
                out.push("scenario A needs a non-empty grids.epsilon".into());
            }
            for (key, empty) in [
                ("features", g.features.is_empty()),
                ("features_strongest", g.features_strongest.is_empty()),
                ("missingness", g.missingness.is_empty()),
                ("synthesizers", g.synthesizers.is_empty()),
            ] {
                if !empty {
                    compat(&mut out, key, "scenarios B and C");
                }
            }
        } else if !g.epsilon.is_empty() {
            compat(&mut out, "epsilon", "scenario A");
        }
        for &s in &g.subsample {
            if !(s > 0.0 && s.is_finite()) {
                out.push(format!("grids.subsample entry {s} must be positive"));
            } else if s > 1.0 && s.fract() != 0.0 {
                out.push(format!(
                    "grids.subsample entry {s} above 1 must be a whole row count"
                ));
            }
        }
        let d = self.dataset.n_features();
        for (key, list) in [
            ("features", &g.features),
            ("features_strongest", &g.features_strongest),
        ] {
            for &k in list {
                if k > d {
                    out.push(format!(
                        "grids.{key} entry {k} exceeds the {d} dataset features"
                    ));
                }
            }
        }
        for &r in &g.missingness {
            if !(0.0..=MAX_MISSINGNESS_RATE).contains(&r) {
                out.push(format!(
                    "grids.missingness entry {r} outside [0, {MAX_MISSINGNESS_RATE}]"
                ));
            }
        }
        for &e in &g.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                out.push(format!("grids.epsilon entry {e} must be positive"));
            }
        }
        for s in &g.synthesizers {
            if let Err(e) = s.validate() {
                out.push(format!("grids.synthesizers: {e}"));
            }
        }
        if let Err(e) = self.model.validate() {
            out.push(format!("model: {e}"));
        }
        match &self.dataset {
            DatasetSource::Benchmark(spec) => {
                if let Err(e) = spec.validate() {
                    out.push(format!("dataset: {e}"));
                }
            }
            DatasetSource::Csv { schema, .. } => {
                if let Err(e) = schema.validate() {
                    out.push(format!("dataset: {e}"));
                }
            }
        }
        if self.metrics.is_empty() {
            out.push("metrics must not be empty".into());
        }
        let mut seen = Vec::new();
        for m in &self.metrics {
            if seen.contains(m) {
                out.push(format!("metric {m} listed twice"));
            }
            seen.push(*m);
        }
        if self.repetitions == 0 {
            out.push("repetitions must be positive".into());
        }
        if self.bootstrap_b == 0 {
            out.push("bootstrap_B must be positive".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            out.push(format!("level {} not in (0, 1)", self.level));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(d))
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
