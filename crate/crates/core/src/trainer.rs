//! Weakly supervised pair construction and end-to-end scorer training.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::{BlockingConfig, BlockingIndex};
use crate::error::{Error, Result};
use crate::linker::{best_surface_form, LinkerModel, PairInput};
use crate::model::{CandidatePair, KnowledgeBase, Mention};
use crate::nn::{sgd_step, Gradients, Rng, DEFAULT_TRIPLET_MARGIN};
use crate::semantic::ContextEncoder;

pub const HIGH_CONFIDENCE_THRESHOLD: f64 = 0.9;
pub const LOW_CONFIDENCE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    HighConfidence,
    LowConfidence,
    /// Labels taken from the mentions' gold ids.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub mention_index: usize,
    pub entity_id: String,
    pub label: u8,
    pub tier: Tier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Negatives sampled per positive.
    pub negative_ratio: usize,
    pub margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            lr: 0.05,
            batch_size: 4,
            seed: 42,
            negative_ratio: 3,
            margin: DEFAULT_TRIPLET_MARGIN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.negative_ratio == 0 {
            return Err(Error::InvalidConfig(
                "batch_size and negative_ratio must be at least 1".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.margin > 0.0) {
            return Err(Error::InvalidConfig("lr and margin must be positive".into()));
        }
        Ok(())
    }
}

/// Draws up to `n` entity ids from `pool` without replacement.
fn sample_negatives(pool: &mut Vec<&str>, n: usize, rng: &mut Rng) -> Vec<String> {
    rng.shuffle(pool);
    pool.iter().take(n).map(|s| s.to_string()).collect()
}

fn push_with_negatives(
    out: &mut Vec<LabeledPair>,
    mention_index: usize,
    positive: &str,
    tier: Tier,
    candidates: &[CandidatePair],
    neg_ratio: usize,
    rng: &mut Rng,
) {
    out.push(LabeledPair {
        mention_index,
        entity_id: positive.to_string(),
        label: 1,
        tier,
    });
    let mut pool: Vec<&str> = candidates
        .iter()
        .map(|c| c.entity_id.as_str())
        .filter(|id| *id != positive)
        .collect();
    for id in sample_negatives(&mut pool, neg_ratio, rng) {
        out.push(LabeledPair {
            mention_index,
            entity_id: id,
            label: 0,
            tier,
        });
    }
}

/// Labels pairs by fuzzy score alone.
///
/// A mention contributes a positive only when a single entity holds its
/// maximum score and that score reaches `threshold`; negatives are drawn from
/// the same mention's blocking candidates. Pairs scoring at least
/// [`HIGH_CONFIDENCE_THRESHOLD`] are tiered high confidence.
pub fn build_weak_dataset(
    mentions: &[Mention],
    kb: &KnowledgeBase,
    threshold: f64,
    neg_ratio: usize,
    blocking: &BlockingConfig,
    rng: &mut Rng,
) -> Result<Vec<LabeledPair>> {
    blocking.validate()?;
    let index = BlockingIndex::new(kb);
    let mut out = Vec::new();
    for (i, m) in mentions.iter().enumerate() {
        let scores = index.best_scores(&m.text)?;
        let Some(max) = scores.iter().copied().reduce(f64::max) else {
            continue;
        };
        let mut at_max = scores.iter().enumerate().filter(|(_, s)| **s == max);
        let (pos, _) = at_max.next().expect("max is attained");
        if at_max.next().is_some() || max < threshold {
            continue;
        }
        let tier = if max >= HIGH_CONFIDENCE_THRESHOLD {
            Tier::HighConfidence
        } else {
            Tier::LowConfidence
        };
        let candidates = index.candidates(i, &m.text, blocking)?;
        push_with_negatives(&mut out, i, &kb.entities()[pos].id, tier, &candidates, neg_ratio, rng);
    }
    if !out.iter().any(|p| p.label == 1) {
        return Err(Error::NoPositives);
    }
    Ok(out)
}

/// Labels pairs from the mentions' gold ids: the gold entity is the positive,
/// negatives come from the mention's other blocking candidates. Mentions
/// without a gold id are skipped.
pub fn build_gold_dataset(
    mentions: &[Mention],
    kb: &KnowledgeBase,
    neg_ratio: usize,
    blocking: &BlockingConfig,
    rng: &mut Rng,
) -> Result<Vec<LabeledPair>> {
    blocking.validate()?;
    let index = BlockingIndex::new(kb);
    let mut out = Vec::new();
    for (i, m) in mentions.iter().enumerate() {
        let Some(gold) = m.gold_id.as_deref() else {
            continue;
        };
        if kb.get(gold).is_none() {
            return Err(Error::UnknownEntity(gold.to_string()));
        }
        let candidates = index.candidates(i, &m.text, blocking)?;
        push_with_negatives(&mut out, i, gold, Tier::Synthetic, &candidates, neg_ratio, rng);
    }
    if out.is_empty() {
        return Err(Error::NoPositives);
    }
    Ok(out)
}

/// Stratified split: within each label, `round(n · test_fraction)` pairs go
/// to the test side. Both sides keep the input order.
pub fn train_test_split(
    dataset: &[LabeledPair],
    test_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<LabeledPair>, Vec<LabeledPair>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test fraction {test_fraction}")));
    }
    let mut is_test = vec![false; dataset.len()];
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset[i].label == label).collect();
        rng.shuffle(&mut idx);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = dataset
        .iter()
        .zip(&is_test)
        .partition(|(_, t)| **t);
    if train.is_empty() || test.is_empty() {
        return Err(Error::TooSmall(format!(
            "{} pairs cannot be split at fraction {test_fraction}",
            dataset.len()
        )));
    }
    let strip = |v: Vec<(&LabeledPair, &bool)>| v.into_iter().map(|(p, _)| p.clone()).collect();
    Ok((strip(train), strip(test)))
}

/// A labeled pair with every model input resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatures {
    pub mention_text: String,
    pub entity_surface: String,
    pub context: Vec<f64>,
    pub anchor: Vec<f64>,
    pub label: f64,
}

impl PairFeatures {
    pub fn input(&self) -> PairInput<'_> {
        PairInput {
            mention_text: &self.mention_text,
            context: &self.context,
            entity_surface: &self.entity_surface,
            anchor: &self.anchor,
        }
    }
}

/// Resolves mention text, context vector, entity surface form and anchor.
/// Context vectors are computed once per mention.
pub fn pair_features(
    dataset: &[LabeledPair],
    mentions: &[Mention],
    kb: &KnowledgeBase,
    context: &dyn ContextEncoder,
    anchors: &HashMap<String, Vec<f64>>,
) -> Result<Vec<PairFeatures>> {
    let mut ctx_cache: HashMap<usize, Vec<f64>> = HashMap::new();
    dataset
        .iter()
        .map(|p| {
            let m = mentions.get(p.mention_index).ok_or_else(|| {
                Error::InvalidConfig(format!("mention index {} out of range", p.mention_index))
            })?;
            let entity = kb
                .get(&p.entity_id)
                .ok_or_else(|| Error::UnknownEntity(p.entity_id.clone()))?;
            let anchor = anchors
                .get(&p.entity_id)
                .ok_or_else(|| Error::UnknownEntity(p.entity_id.clone()))?;
            let ctx = match ctx_cache.get(&p.mention_index) {
                Some(c) => c.clone(),
                None => {
                    let c = context.encode(m)?.vector;
                    ctx_cache.insert(p.mention_index, c.clone());
                    c
                }
            };
            Ok(PairFeatures {
                mention_text: m.text.clone(),
                entity_surface: best_surface_form(&m.text, entity).to_string(),
                context: ctx,
                anchor: anchor.clone(),
                label: f64::from(p.label),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean BCE over the epoch, measured before each batch's update.
    pub loss: f64,
    pub accuracy: f64,
}

/// Joint SGD on BCE over the surface encoder and scorer. The entity encoder
/// and all context/anchor vectors stay fixed.
pub fn train_linker(
    model: &mut LinkerModel,
    data: &[PairFeatures],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    let positives = data.iter().filter(|p| p.label == 1.0).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::SingleClassDataset);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let (mut loss, mut correct) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            // forward/backward in parallel, reduced in batch order
            let evals = batch
                .par_iter()
                .map(|&i| {
                    let p = &data[i];
                    model.scored_objective(&p.input(), p.label)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads = Gradients::new();
            for (&i, (score, eval)) in batch.iter().zip(&evals) {
                loss += eval.loss;
                if model.scorer.decide(*score) == (data[i].label == 1.0) {
                    correct += 1;
                }
                grads.accumulate(&eval.grads, 1.0 / batch.len() as f64);
            }
            sgd_step(model, &grads, cfg.lr)?;
        }
        history.push(EpochStats {
            epoch,
            loss: loss / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(history)
}

/// Model scores for every pair, in input order.
pub fn score_features(model: &LinkerModel, data: &[PairFeatures]) -> Result<Vec<f64>> {
    data.par_iter().map(|p| model.score(&p.input())).collect()
}
