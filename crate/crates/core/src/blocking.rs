//! Candidate generation: keep the entities whose best fuzzy score against a
//! mention (over the canonical name and every alias) meets a threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CandidatePair, KnowledgeBase, Mention};
use crate::similarity::{fuzzy_score_prepared, PreparedText};

pub const DEFAULT_BLOCKING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockingConfig {
    pub threshold: f64,
}

impl Default for BlockingConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_BLOCKING_THRESHOLD,
        }
    }
}

impl BlockingConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        let cfg = Self { threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.threshold) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "blocking threshold {} outside [0, 1]",
                self.threshold
            )))
        }
    }
}

struct PreparedEntity {
    id: String,
    forms: Vec<PreparedText>,
}

/// Surface forms of every entity, pre-split for repeated scoring.
pub struct BlockingIndex {
    entities: Vec<PreparedEntity>,
}

impl BlockingIndex {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let entities = kb
            .iter()
            .map(|e| PreparedEntity {
                id: e.id.clone(),
                forms: e.surface_forms().map(PreparedText::new).collect(),
            })
            .collect();
        Self { entities }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Max fuzzy average of `text` against each entity, in KB order.
    pub fn best_scores(&self, text: &str) -> Result<Vec<f64>> {
        let mention = PreparedText::new(text);
        self.entities
            .iter()
            .map(|e| best_score(&mention, &e.forms))
            .collect()
    }

    pub fn candidates(
        &self,
        mention_index: usize,
        text: &str,
        cfg: &BlockingConfig,
    ) -> Result<Vec<CandidatePair>> {
        let mention = PreparedText::new(text);
        let mut out = Vec::new();
        for e in &self.entities {
            let score = best_score(&mention, &e.forms)?;
            if score >= cfg.threshold {
                out.push(CandidatePair {
                    mention_index,
                    entity_id: e.id.clone(),
                    fuzzy_score: score,
                });
            }
        }
        sort_candidates(&mut out);
        Ok(out)
    }

    /// Element `i` equals `candidates(i, &mentions[i].text, cfg)`.
    pub fn candidates_batch(
        &self,
        mentions: &[Mention],
        cfg: &BlockingConfig,
    ) -> Result<Vec<Vec<CandidatePair>>> {
        mentions
            .par_iter()
            .enumerate()
            .map(|(i, m)| self.candidates(i, &m.text, cfg))
            .collect()
    }
}

fn best_score(mention: &PreparedText, forms: &[PreparedText]) -> Result<f64> {
    let mut best = 0.0f64;
    for f in forms {
        best = best.max(fuzzy_score_prepared(mention, f)?.average);
    }
    Ok(best)
}

/// Score descending, then entity id ascending.
pub fn sort_candidates(c: &mut [CandidatePair]) {
    c.sort_by(|a, b| {
        b.fuzzy_score
            .total_cmp(&a.fuzzy_score)
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
}

pub fn candidates(
    mention_index: usize,
    mention: &Mention,
    kb: &KnowledgeBase,
    cfg: &BlockingConfig,
) -> Result<Vec<CandidatePair>> {
    BlockingIndex::new(kb).candidates(mention_index, &mention.text, cfg)
}

pub fn candidates_batch(
    mentions: &[Mention],
    kb: &KnowledgeBase,
    cfg: &BlockingConfig,
) -> Result<Vec<Vec<CandidatePair>>> {
    BlockingIndex::new(kb).candidates_batch(mentions, cfg)
}
