use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::{PhysicsConfig, ScenarioConfig};
use crate::marl::{AlgorithmConfig, TrainConfig};

/// Floating-point width used for networks and simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            4 => Some(Self::F32),
            8 => Some(Self::F64),
            _ => None,
        }
    }
}

/// Output cadence. Episode counts are 1-based: with `eval_every = 1000` the
/// first evaluation follows the 1000th episode. Zero disables a cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogConfig {
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub checkpoint_every: u64,
    /// Write per-update records to diagnostics.jsonl.
    pub diagnostics: bool,
    /// Trace every n-th episode to trace.jsonl.
    pub trace_every: u64,
    /// Include per-critic bias vectors in traces.
    pub trace_biases: bool,
}

impl Default for LogConfig {
    fn default() -> Self {
        Self {
            eval_every: 1000,
            eval_episodes: 100,
            checkpoint_every: 1000,
            diagnostics: true,
            trace_every: 0,
            trace_biases: false,
        }
    }
}

/// A whole experiment. Every section and key is optional; missing values
/// take their defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub precision: Precision,
    pub scenario: ScenarioConfig,
    pub physics: PhysicsConfig,
    pub algorithm: AlgorithmConfig,
    pub train: TrainConfig,
    pub log: LogConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario.validate()?;
        self.physics.validate()?;
        self.algorithm.validate()?;
        self.train.validate()?;
        if self.log.eval_every > 0 && self.log.eval_episodes == 0 {
            return Err(HarnessError::Config("log.eval_episodes must be positive when log.eval_every is set".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string() + &span_hint(text, &e)))?;
    cfg.validate()?;
    Ok(cfg)
}

fn span_hint(text: &str, e: &toml::de::Error) -> String {
    e.span()
        .map(|s| {
            let line = text[..s.start].matches('\n').count() + 1;
            let from = text[..s.start].rfind('\n').map_or(0, |i| i + 1);
            let to = text[s.end..].find('\n').map_or(text.len(), |i| s.end + i);
            format!(" (line {line}: `{}`)", text[from..to].trim())
        })
        .unwrap_or_default()
}
