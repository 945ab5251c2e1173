//! Versioned JSON checkpoints holding every trained tensor plus the config
//! echo, seed and training history.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::linker::LinkerModel;
use crate::metrics::MetricsReport;
use crate::nn::{DenseLayer, Tensor2, RNG_ALGORITHM};
use crate::trainer::EpochStats;

pub const CHECKPOINT_FORMAT: &str = "entlink-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Shape of the word vectors the model was trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorsInfo {
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub supervision: String,
    pub pairs: usize,
    pub positives: usize,
    pub triplets: usize,
    pub triplet_loss: Vec<f64>,
    pub epochs: Vec<EpochStats>,
    pub holdout: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: Value,
    pub seed: u64,
    pub rng: String,
    pub vectors: VectorsInfo,
    pub model: LinkerModel,
    pub training: TrainingSummary,
}

fn check_layer(name: &str, l: &DenseLayer) -> Result<()> {
    let w = Tensor2::from_vec(l.weights.rows(), l.weights.cols(), l.weights.data().to_vec())
        .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
    DenseLayer::new(w, l.bias.clone(), l.activation)
        .map(|_| ())
        .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))
}

impl Checkpoint {
    pub fn new(
        config: &PipelineConfig,
        vectors: VectorsInfo,
        model: LinkerModel,
        training: TrainingSummary,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: config.echo(),
            seed: config.train.seed,
            rng: RNG_ALGORITHM.to_string(),
            vectors,
            model,
            training,
        }
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let m = &self.model;
        let s = &m.surface;
        let t = &s.char_table;
        Tensor2::from_vec(t.rows(), t.cols(), t.data().to_vec())
            .map_err(|e| Error::Checkpoint(format!("char_table: {e}")))?;
        for (name, layer) in [
            ("word_proj", &s.word_proj),
            ("entity_pool", &s.entity_pool),
            ("desc_proj", &m.entity_encoder.desc_proj),
            ("mention_proj", &m.scorer.mention_proj),
            ("entity_proj", &m.scorer.entity_proj),
            ("head_hidden", &m.scorer.head_hidden),
            ("head_out", &m.scorer.head_out),
        ] {
            check_layer(name, layer)?;
        }
        s.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let sc = &m.scorer;
        let joint = 2 * (s.config.surface_dim + sc.mention_proj.output_dim());
        let consistent = sc.entity_proj.output_dim() == sc.mention_proj.output_dim()
            && sc.entity_proj.input_dim() == m.entity_encoder.dim()
            && m.entity_encoder.desc_proj.input_dim() == self.vectors.dim
            && m.entity_encoder.dim() == self.vectors.dim
            && sc.head_hidden.input_dim() == joint
            && sc.head_out.input_dim() == sc.head_hidden.output_dim()
            && sc.head_out.output_dim() == 1;
        if !consistent {
            return Err(Error::Checkpoint("layer shapes are inconsistent".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the header first so version mismatches get a precise error
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let version = v.get("version").and_then(Value::as_u64);
        if version != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Error::Checkpoint(format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                version.map_or_else(|| "missing".to_string(), |v| v.to_string())
            )));
        }
        let ck: Self = serde_json::from_value(v).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.validate()?;
        Ok(ck)
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The effective configuration recorded at training time.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        PipelineConfig::from_layers(&PipelineConfig::default().echo(), Some(&self.config))
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory, so a
/// failure never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
