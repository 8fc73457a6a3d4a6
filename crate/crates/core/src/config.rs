//! Run configuration: one TOML document with `task`, `reservoir`, `learner`,
//! `noise` and `experiment` sections, optional named presets, dotted
//! `key=value` overrides, and a content hash stamped into every output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, ExperimentKind, Simulation};
use crate::learner::{BooleanWeights, DeltaCompare, SelectionMode};
use crate::reservoir::ReservoirParams;
use crate::scalar::Real;
use crate::seeds::derive_seed;
use crate::task::TaskConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub mode: SelectionMode,
    pub compare: DeltaCompare,
    /// Fixed epoch budget; when absent the budget is `epochs_per_node * N`.
    pub epochs: Option<usize>,
    pub epochs_per_node: usize,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self { mode: SelectionMode::Greedy, compare: DeltaCompare::Remeasure, epochs: None, epochs_per_node: 4 }
    }
}

/// How `noise.sigma_out` is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScale {
    /// Multiple of the raw output standard deviation at the initial weights.
    OutputStd,
    /// Absolute standard deviation in raw output units.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma_out: f64,
    pub scale: NoiseScale,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma_out: 0.1, scale: NoiseScale::OutputStd }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub minimizers: usize,
    pub slaves: usize,
    pub runs: usize,
    pub shared_initial: bool,
    pub shared_selector: bool,
    /// Initial separation for `separated-pair`; defaults to `min(100, N)`.
    pub h1: Option<usize>,
    pub probe_reps: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { minimizers: 20, slaves: 2, runs: 10, shared_initial: true, shared_selector: false, h1: None, probe_reps: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Named preset the document was layered on, if any.
    pub preset: Option<String>,
    pub task: TaskConfig,
    pub reservoir: ReservoirParams,
    pub learner: LearnerSection,
    pub noise: NoiseSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            preset: None,
            task: TaskConfig::default(),
            reservoir: ReservoirParams::default(),
            learner: LearnerSection::default(),
            noise: NoiseSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

pub const PRESETS: [&str; 7] =
    ["fig2-greedy", "fig2-markovian", "fig4a", "fig4b-greedy", "fig4b-markovian", "fig4c", "fig5"];

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self { preset: Some(name.to_string()), ..Self::default() };
        match name {
            "fig2-greedy" => {}
            "fig2-markovian" => {
                c.learner.mode = SelectionMode::Markovian;
                c.experiment.minimizers = 14;
            }
            "fig4a" => c.experiment.slaves = 2,
            "fig4b-greedy" | "fig4b-markovian" => {
                if name.ends_with("markovian") {
                    c.learner.mode = SelectionMode::Markovian;
                }
                c.experiment.slaves = 1;
                c.learner.epochs_per_node = 10;
            }
            "fig4c" => {
                c.experiment.h1 = Some(100);
                c.learner.epochs_per_node = 10;
            }
            "fig5" => {}
            _ => return Err(Error::Config(format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")))),
        }
        Ok(c)
    }

    /// Parses a TOML document. A top-level `preset` key layers the document
    /// over that preset; `overrides` (`dotted.key=value`) are applied last.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let mut value = toml::Value::Table(doc);
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let base = match value.get("preset") {
            Some(toml::Value::String(p)) => Self::preset(p)?,
            Some(_) => return Err(Error::Config("`preset` must be a string".into())),
            None => Self::default(),
        };
        let mut merged = to_toml(&base)?;
        merge(&mut merged, value);
        let config: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads `path`, or a bare preset when `path` is `preset:<name>`.
    pub fn load(path: &str, overrides: &[String]) -> Result<Self> {
        if let Some(name) = path.strip_prefix("preset:") {
            return Self::from_toml_str(&format!("preset = {:?}", name), overrides);
        }
        if !Path::new(path).is_file() {
            return Err(Error::Config(format!("config not found: {path}")));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        self.task.mackey_glass.validate()?;
        if self.learner.epochs == Some(0) || self.learner.epochs_per_node == 0 {
            return Err(Error::Config("epoch budget must be >= 1".into()));
        }
        if !(self.noise.sigma_out >= 0.0) || !self.noise.sigma_out.is_finite() {
            return Err(Error::Config("noise.sigma_out must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("config serializes"))
    }

    pub fn nodes(&self) -> usize {
        self.reservoir.nodes()
    }

    pub fn epochs(&self) -> usize {
        self.learner.epochs.unwrap_or(self.learner.epochs_per_node * self.nodes())
    }

    pub fn series_seed(&self) -> u64 {
        derive_seed(self.seed, "series", 0)
    }

    /// Reservoir parameters with the realization seed mixed into the master seed.
    pub fn resolved_reservoir(&self) -> ReservoirParams {
        ReservoirParams { seed: derive_seed(self.seed, "reservoir", self.reservoir.seed), ..self.reservoir.clone() }
    }

    /// Hash of everything that determines the state matrices.
    pub fn params_hash(&self) -> String {
        hash_json(&serde_json::json!({
            "task": self.task,
            "reservoir": self.resolved_reservoir(),
            "series_seed": self.series_seed(),
        }))
    }

    /// Absolute noise std for a built simulation.
    pub fn resolve_sigma<T: Real>(&self, sim: &Simulation<T>) -> Result<f64> {
        match self.noise.scale {
            NoiseScale::Absolute => Ok(self.noise.sigma_out),
            NoiseScale::OutputStd => {
                if self.noise.sigma_out == 0.0 {
                    return Ok(0.0);
                }
                let initial = BooleanWeights::random(sim.nodes(), derive_seed(self.seed, "initial", 0));
                Ok(self.noise.sigma_out * sim.output_std(&initial)?)
            }
        }
    }

    pub fn experiment_config(&self, kind: ExperimentKind, sigma_out: f64) -> ExperimentConfig {
        let n = self.nodes();
        let e = &self.experiment;
        let mut c = ExperimentConfig::new(kind, n, sigma_out, self.seed);
        c.minimizers = e.minimizers;
        c.slaves = e.slaves;
        c.runs = e.runs;
        c.shared_initial = e.shared_initial;
        c.shared_selector = e.shared_selector;
        c.h1 = e.h1.unwrap_or(100.min(n));
        c.probe_reps = e.probe_reps;
        c.epochs = self.epochs();
        c.mode = self.learner.mode;
        c.compare = self.learner.compare;
        c
    }
}

pub fn hash_json(value: &serde_json::Value) -> String {
    // serde_json maps are ordered by key, so this string is canonical
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

fn to_toml<S: Serialize>(value: &S) -> Result<toml::Value> {
    toml::Value::try_from(value).map_err(|e| Error::Config(e.to_string()))
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`. The value is parsed as a TOML literal and falls back
/// to a plain string, so `learner.mode=markovian` needs no quotes.
pub fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("override `{key}` descends into a scalar")))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("override `{key}` descends into a scalar")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
