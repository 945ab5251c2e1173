//! Pipeline configuration: every tunable constant in one JSON-serializable
//! document, with partial overrides merged over defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blocking::BlockingConfig;
use crate::error::{Error, Result};
use crate::scorer::ScorerConfig;
use crate::semantic::TripletConfig;
use crate::surface::SurfaceConfig;
use crate::trainer::{TrainConfig, HIGH_CONFIDENCE_THRESHOLD, LOW_CONFIDENCE_THRESHOLD};

/// Source of training labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervision {
    /// Gold ids when any mention carries one, fuzzy-score labels otherwise.
    #[default]
    Auto,
    Weak,
    Gold,
}

/// Which fuzzy-score tier bounds weak positives from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakTier {
    High,
    /// Admits both tiers.
    #[default]
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakConfig {
    pub high_confidence: f64,
    pub low_confidence: f64,
    pub tier: WeakTier,
}

impl Default for WeakConfig {
    fn default() -> Self {
        Self {
            high_confidence: HIGH_CONFIDENCE_THRESHOLD,
            low_confidence: LOW_CONFIDENCE_THRESHOLD,
            tier: WeakTier::Low,
        }
    }
}

impl WeakConfig {
    pub fn threshold(&self) -> f64 {
        match self.tier {
            WeakTier::High => self.high_confidence,
            WeakTier::Low => self.low_confidence,
        }
    }
}

/// Input and output locations. Never echoed into artifacts, so identical
/// runs writing to different places still produce identical bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub entities: Option<PathBuf>,
    pub mentions: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub context_vectors: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub blocking: BlockingConfig,
    pub weak: WeakConfig,
    pub supervision: Supervision,
    pub surface: SurfaceConfig,
    pub scorer: ScorerConfig,
    pub triplet: TripletConfig,
    pub train: TrainConfig,
    /// Share of labeled pairs held out for evaluation after training; 0 trains on all.
    pub holdout_fraction: f64,
    #[serde(skip_serializing)]
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            blocking: BlockingConfig::default(),
            weak: WeakConfig::default(),
            supervision: Supervision::Auto,
            surface: SurfaceConfig::default(),
            scorer: ScorerConfig::default(),
            triplet: TripletConfig::default(),
            train: TrainConfig::default(),
            holdout_fraction: 0.2,
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.blocking.validate()?;
        self.surface.validate()?;
        self.train.validate()?;
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidConfig(format!(
                "holdout fraction {}",
                self.holdout_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.scorer.decision_threshold) {
            return Err(Error::InvalidConfig(format!(
                "decision threshold {}",
                self.scorer.decision_threshold
            )));
        }
        Ok(())
    }

    /// The config as echoed into artifacts (paths omitted).
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Deep-merges `patch` over `base` and parses the result.
    pub fn from_layers(base: &Value, patch: Option<&Value>) -> Result<Self> {
        let mut merged = base.clone();
        if let Some(p) = patch {
            merge(&mut merged, p);
        }
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a (possibly partial) config document over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let patch: Value = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::from_layers(&Self::default().echo(), Some(&patch))
    }
}

/// Objects merge key by key; any other value replaces.
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
