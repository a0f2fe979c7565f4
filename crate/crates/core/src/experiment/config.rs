use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::ExperimentError;
use crate::policy::{LearningParams, StateThresholds, VotingParams};
use crate::sim::SimConfig;
use crate::workload::{RateProfile, WorkloadTrace};

/// Keys that configure the experiment itself rather than a component.
const EXPERIMENT_KEYS: [&str; 7] = [
    "seed",
    "policy",
    "horizon",
    "output_dir",
    "record_debt",
    "profile",
    "trace",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PolicyKind {
    #[default]
    DebtAware,
    Voting,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::DebtAware => "debt-aware",
            PolicyKind::Voting => "voting",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "debt-aware" => Ok(PolicyKind::DebtAware),
            "voting" => Ok(PolicyKind::Voting),
            other => Err(format!("unknown policy {other:?}, expected debt-aware or voting")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSource {
    /// A rate profile; `duration` comes from the profile file if it has one.
    Profile { profile: RateProfile, duration: Option<f64> },
    /// A trace file in the two-column text format.
    Trace(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub learning: LearningParams,
    pub thresholds: StateThresholds,
    pub voting: VotingParams,
    pub policy: PolicyKind,
    pub workload: WorkloadSource,
    pub seed: u64,
    /// Defaults to the workload duration.
    pub horizon: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub record_debt: bool,
}

impl ExperimentConfig {
    /// Defaults for every component around the given workload.
    pub fn new(workload: WorkloadSource, policy: PolicyKind, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            sim: SimConfig::default(),
            learning: LearningParams::default(),
            thresholds: StateThresholds::default(),
            voting: VotingParams::default(),
            policy,
            workload,
            seed,
            horizon: None,
            output_dir: None,
            record_debt: true,
        }
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    /// Parses flat `key = value` TOML text.
    pub fn parse(text: &str, base_dir: &Path) -> Result<ExperimentConfig, ExperimentError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| config_err(e.message()))?;

        let sim_keys = default_keys(&SimConfig::default());
        let learning_keys = default_keys(&LearningParams::default());
        let threshold_keys = default_keys(&StateThresholds::default());
        let voting_keys = default_keys(&VotingParams::default());
        let mut parts: [Table; 4] = Default::default();
        let mut own = Table::new();
        for (key, value) in table {
            let slot = [&sim_keys, &learning_keys, &threshold_keys, &voting_keys]
                .iter()
                .position(|keys| keys.contains(&key));
            match slot {
                Some(i) => {
                    parts[i].insert(key, value);
                }
                None if EXPERIMENT_KEYS.contains(&key.as_str()) => {
                    own.insert(key, value);
                }
                None => return Err(config_err(format!("unknown key {key:?}"))),
            }
        }
        let [sim, learning, thresholds, voting] = parts;

        let seed = match own.get("seed") {
            None => 0,
            Some(v) => v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .ok_or_else(|| config_err("seed must be a non-negative integer"))?,
        };
        let policy = match own.get("policy") {
            None => PolicyKind::default(),
            Some(v) => v
                .as_str()
                .ok_or_else(|| config_err("policy must be a string"))?
                .parse()
                .map_err(config_err)?,
        };
        let horizon = own.get("horizon").map(number).transpose()?;
        let record_debt = match own.get("record_debt") {
            None => true,
            Some(v) => v.as_bool().ok_or_else(|| config_err("record_debt must be true or false"))?,
        };
        let path_of = |key: &str| -> Result<Option<PathBuf>, ExperimentError> {
            own.get(key)
                .map(|v| {
                    v.as_str()
                        .map(|s| base_dir.join(s))
                        .ok_or_else(|| config_err(format!("{key} must be a path string")))
                })
                .transpose()
        };
        let output_dir = path_of("output_dir")?;
        let workload = match (path_of("profile")?, path_of("trace")?) {
            (Some(p), None) => load_profile(&p)?,
            (None, Some(t)) => WorkloadSource::Trace(t),
            (Some(_), Some(_)) => return Err(config_err("give either profile or trace, not both")),
            (None, None) => return Err(config_err("missing workload: set profile or trace")),
        };

        let config = ExperimentConfig {
            sim: component(sim)?,
            learning: component(learning)?,
            thresholds: component(thresholds)?,
            voting: component(voting)?,
            policy,
            workload,
            seed,
            horizon,
            output_dir,
            record_debt,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.sim.validate().map_err(|e| config_err(e.to_string()))?;
        self.learning.validate().map_err(|e| config_err(e.to_string()))?;
        self.voting.validate().map_err(|e| config_err(e.to_string()))?;
        let t = &self.thresholds;
        if !(0.0 <= t.queued_low && t.queued_low <= t.queued_high && t.queued_high <= 1.0)
            || !(0.0 <= t.idle_low && t.idle_low <= t.idle_high && t.idle_high <= 1.0)
        {
            return Err(config_err("state thresholds must satisfy 0 <= low <= high <= 1"));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(config_err(format!("horizon must be positive, got {h}")));
            }
        }
        if self.policy == PolicyKind::DebtAware && !self.record_debt {
            return Err(config_err("the debt-aware policy needs record_debt = true"));
        }
        Ok(())
    }

    /// Builds the workload trace: generated from the profile with the
    /// config seed, or read from the trace file.
    pub fn load_workload(&self) -> Result<WorkloadTrace, ExperimentError> {
        match &self.workload {
            WorkloadSource::Profile { profile, duration } => {
                let duration = self
                    .horizon
                    .or(*duration)
                    .ok_or_else(|| config_err("set horizon or a profile duration"))?;
                Ok(crate::workload::generate_trace(profile, duration, self.seed)?)
            }
            WorkloadSource::Trace(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
                crate::workload::parse_trace(&text).map_err(|source| ExperimentError::Workload {
                    path: path.clone(),
                    source,
                })
            }
        }
    }
}

/// Reads a rate profile file into a workload source.
pub fn load_profile(path: &Path) -> Result<WorkloadSource, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let (profile, duration) = RateProfile::from_toml(&text).map_err(|source| ExperimentError::Workload {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(WorkloadSource::Profile { profile, duration })
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn number(v: &Value) -> Result<f64, ExperimentError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(config_err(format!("expected a number, got {v}"))),
    }
}

fn default_keys<T: Serialize>(defaults: &T) -> Vec<String> {
    match Value::try_from(defaults) {
        Ok(Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn component<T: DeserializeOwned>(table: Table) -> Result<T, ExperimentError> {
    Value::Table(table).try_into::<T>().map_err(|e| config_err(e.to_string()))
}
