//! End-to-end orchestration behind the CLI: training, linking, evaluation and
//! the JSONL artifact formats.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::{Checkpoint, TrainingSummary, VectorsInfo};
use crate::config::{PipelineConfig, Supervision};
use crate::error::{Error, Result};
use crate::linker::{LinkerModel, Linker};
use crate::metrics::MetricsReport;
use crate::model::{KnowledgeBase, LinkDecision, Mention, CandidateScore};
use crate::nn::Rng;
use crate::semantic::{build_triplets, train_triplet, ContextEncoder};
use crate::trainer::{
    build_gold_dataset, build_weak_dataset, pair_features, score_features, train_linker,
    train_test_split, LabeledPair,
};
use crate::vectors::WordVectors;

pub const ARTIFACT_VERSION: u32 = 1;
pub const CANDIDATES_FORMAT: &str = "entlink-candidates";
pub const DECISIONS_FORMAT: &str = "entlink-decisions";
pub const DATASET_FORMAT: &str = "entlink-dataset";
pub const PAIRS_FORMAT: &str = "entlink-pairs";
pub const METRICS_FORMAT: &str = "entlink-metrics";

/// First line of every JSONL artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format: String,
    pub version: u32,
    pub config: Value,
}

pub fn write_header<W: Write + ?Sized>(out: &mut W, format: &str, cfg: &PipelineConfig) -> Result<()> {
    let h = ArtifactHeader {
        format: format.to_string(),
        version: ARTIFACT_VERSION,
        config: cfg.echo(),
    };
    writeln!(out, "{}", serde_json::to_string(&h).expect("header serializes"))?;
    Ok(())
}

pub fn write_record<W: Write + ?Sized, T: Serialize>(out: &mut W, record: &T) -> Result<()> {
    let line = serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

/// Reads JSONL records. A leading header line is optional; when present its
/// format and version must match.
pub fn read_records<R: BufRead, T: serde::de::DeserializeOwned>(
    source: R,
    format: &str,
) -> Result<(Option<ArtifactHeader>, Vec<T>)> {
    let mut header = None;
    let mut records = Vec::new();
    let mut first = true;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        };
        if std::mem::take(&mut first) {
            let v: Value = serde_json::from_str(&line).map_err(malformed)?;
            if v.get("format").is_some() {
                let h: ArtifactHeader = serde_json::from_value(v).map_err(malformed)?;
                if h.format != format || h.version != ARTIFACT_VERSION {
                    return Err(Error::MalformedRecord {
                        line: line_no,
                        reason: format!(
                            "expected {format} version {ARTIFACT_VERSION}, found {} version {}",
                            h.format, h.version
                        ),
                    });
                }
                header = Some(h);
                continue;
            }
            records.push(serde_json::from_value(v).map_err(malformed)?);
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(malformed)?);
    }
    Ok((header, records))
}

/// Trained model plus what went into it.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: LinkerModel,
    pub dataset: Vec<LabeledPair>,
    pub summary: TrainingSummary,
}

impl Trained {
    pub fn checkpoint(&self, cfg: &PipelineConfig, vectors: &WordVectors) -> Checkpoint {
        Checkpoint::new(
            cfg,
            VectorsInfo {
                dim: vectors.dim(),
                count: vectors.len(),
            },
            self.model.clone(),
            self.summary.clone(),
        )
    }
}

fn resolve_supervision(s: Supervision, mentions: &[Mention]) -> Supervision {
    match s {
        Supervision::Auto if mentions.iter().any(|m| m.gold_id.is_some()) => Supervision::Gold,
        Supervision::Auto => Supervision::Weak,
        other => other,
    }
}

/// Triplet pre-training of the entity encoder, pair labeling, an optional
/// held-out split, and joint training of the surface encoder and scorer.
///
/// Every random draw comes from a fixed fork of the configured seed.
pub fn train(
    kb: &KnowledgeBase,
    mentions: &[Mention],
    vectors: &WordVectors,
    context: &dyn ContextEncoder,
    cfg: &PipelineConfig,
) -> Result<Trained> {
    cfg.validate()?;
    let root = Rng::new(cfg.train.seed);
    let mut model = LinkerModel::init(
        cfg.surface,
        &cfg.scorer,
        context.dim(),
        vectors.dim(),
        cfg.triplet.margin,
        &mut root.fork(1),
    )?;

    let triplets = build_triplets(kb, vectors, &mut root.fork(2), cfg.triplet.per_entity)?;
    let triplet_loss = train_triplet(
        &mut model.entity_encoder,
        kb,
        vectors,
        &triplets,
        &cfg.triplet,
        &mut root.fork(3),
    )?;

    let supervision = resolve_supervision(cfg.supervision, mentions);
    let neg = cfg.train.negative_ratio;
    let dataset = match supervision {
        Supervision::Gold => build_gold_dataset(mentions, kb, neg, &cfg.blocking, &mut root.fork(4))?,
        _ => build_weak_dataset(mentions, kb, cfg.weak.threshold(), neg, &cfg.blocking, &mut root.fork(4))?,
    };
    let (train_set, test_set) = if cfg.holdout_fraction > 0.0 {
        train_test_split(&dataset, cfg.holdout_fraction, &mut root.fork(5))?
    } else {
        (dataset.clone(), Vec::new())
    };

    let anchors = model.entity_encoder.encode_all(vectors, kb)?;
    let features = pair_features(&train_set, mentions, kb, context, &anchors)?;
    let epochs = train_linker(&mut model, &features, &cfg.train, &mut root.fork(6))?;

    let holdout = if test_set.is_empty() {
        None
    } else {
        let test = pair_features(&test_set, mentions, kb, context, &anchors)?;
        let scores = score_features(&model, &test)?;
        let scored: Vec<(f64, bool)> = scores.iter().zip(&test).map(|(&s, p)| (s, p.label == 1.0)).collect();
        // a single-class held-out split leaves AUC undefined; report nothing then
        MetricsReport::from_scores(&scored, model.scorer.decision_threshold).ok()
    };

    let summary = TrainingSummary {
        supervision: match supervision {
            Supervision::Gold => "gold",
            _ => "weak",
        }
        .to_string(),
        pairs: dataset.len(),
        positives: dataset.iter().filter(|p| p.label == 1).count(),
        triplets: triplets.len(),
        triplet_loss,
        epochs,
        holdout,
    };
    Ok(Trained {
        model,
        dataset,
        summary,
    })
}

/// One line of a decisions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub doc_id: String,
    pub text: String,
    pub entity_id: Option<String>,
    pub score: Option<f64>,
    pub linked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateScore>>,
}

impl DecisionRecord {
    pub fn new(mention: &Mention, d: &LinkDecision, explain: bool) -> Self {
        Self {
            doc_id: mention.doc_id.clone(),
            text: mention.text.clone(),
            entity_id: d.entity_id.clone(),
            score: d.score,
            linked: d.linked,
            candidate_count: explain.then_some(d.candidate_count),
            candidates: explain.then(|| d.candidates.clone()),
        }
    }
}

/// Links every mention with a checkpoint's model.
pub fn link(
    ck: &Checkpoint,
    kb: &KnowledgeBase,
    mentions: &[Mention],
    vectors: &WordVectors,
    context: &dyn ContextEncoder,
    cfg: &PipelineConfig,
) -> Result<Vec<LinkDecision>> {
    if vectors.dim() != ck.vectors.dim {
        return Err(Error::ShapeMismatch(format!(
            "word vectors are {}-d, checkpoint was trained on {}-d",
            vectors.dim(),
            ck.vectors.dim
        )));
    }
    let mut model = ck.model.clone();
    model.scorer.decision_threshold = cfg.scorer.decision_threshold;
    let linker = Linker::new(&model, kb, vectors, context, cfg.blocking)?;
    linker.link_all(mentions)
}

/// One labeled pair in an evaluation file. `score` is used only when no
/// model is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub context: String,
    pub entity_id: String,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl EvalRecord {
    pub fn mention(&self) -> Mention {
        Mention {
            doc_id: self.doc_id.clone(),
            text: crate::model::normalize(&self.text),
            context: crate::model::normalize(&self.context),
            gold_id: None,
        }
    }
}

/// Scores every record with `model`, in input order.
pub fn score_records(
    model: &LinkerModel,
    records: &[EvalRecord],
    kb: &KnowledgeBase,
    vectors: &WordVectors,
    context: &dyn ContextEncoder,
) -> Result<Vec<f64>> {
    let anchors = model.entity_encoder.encode_all(vectors, kb)?;
    let mut mentions: Vec<Mention> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let pairs: Vec<LabeledPair> = records
        .iter()
        .map(|r| {
            let m = r.mention();
            let key = (m.doc_id.clone(), m.text.clone());
            let mention_index = *index.entry(key).or_insert_with(|| {
                mentions.push(m);
                mentions.len() - 1
            });
            LabeledPair {
                mention_index,
                entity_id: r.entity_id.clone(),
                label: r.label.min(1),
                tier: crate::trainer::Tier::Synthetic,
            }
        })
        .collect();
    let features = pair_features(&pairs, &mentions, kb, context, &anchors)?;
    score_features(model, &features)
}

/// Pairwise metrics plus per-mention resolution accuracy. A mention counts as
/// correct when the highest-scoring pair above `threshold` (ties to the
/// smaller entity id) is its positive, or when nothing passes and it has no
/// positive.
pub fn evaluate(records: &[EvalRecord], scores: &[f64], threshold: f64) -> Result<MetricsReport> {
    if records.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} records, {} scores",
            records.len(),
            scores.len()
        )));
    }
    if records.iter().any(|r| r.label > 1) {
        return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
    }
    let scored: Vec<(f64, bool)> = scores.iter().zip(records).map(|(&s, r)| (s, r.label == 1)).collect();
    let report = MetricsReport::from_scores(&scored, threshold)?;

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let g = *index.entry((&r.doc_id, &r.text)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let correct = groups
        .iter()
        .filter(|g| {
            let chosen = g
                .iter()
                .filter(|&&i| scores[i] > threshold)
                .max_by(|&&a, &&b| {
                    scores[a]
                        .total_cmp(&scores[b])
                        .then_with(|| records[b].entity_id.cmp(&records[a].entity_id))
                });
            match chosen {
                Some(&i) => records[i].label == 1,
                None => g.iter().all(|&i| records[i].label == 0),
            }
        })
        .count();
    Ok(report.with_mention_accuracy(correct, groups.len()))
}
