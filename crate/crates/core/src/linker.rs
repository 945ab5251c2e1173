//! The full scoring model and per-mention link resolution.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::{BlockingConfig, BlockingIndex};
use crate::error::{Error, Result};
use crate::model::{CandidatePair, CandidateScore, Entity, KnowledgeBase, LinkDecision, Mention};
use crate::nn::{Evaluation, NodeId, Parameterized, Rng, Tape};
use crate::scorer::{ScorerConfig, ScorerParams};
use crate::semantic::{ContextEncoder, SemanticVector, TripletEntityEncoder};
use crate::similarity::fuzzy_score;
use crate::surface::{SurfaceConfig, SurfaceEncoder, SURFACE_PARAM_TENSORS};
use crate::vectors::WordVectors;

/// Id of the first scorer tensor in [`LinkerModel`]'s parameter list.
pub const SCORER_BASE: usize = SURFACE_PARAM_TENSORS;

/// Surface encoder, scorer and the (frozen) entity description encoder.
///
/// Only the surface encoder and scorer are exposed through [`Parameterized`];
/// the entity encoder is trained separately and stays fixed afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkerModel {
    pub surface: SurfaceEncoder,
    pub scorer: ScorerParams,
    pub entity_encoder: TripletEntityEncoder,
}

/// Everything needed to score one (mention, entity) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInput<'s> {
    pub mention_text: &'s str,
    pub context: &'s [f64],
    pub entity_surface: &'s str,
    pub anchor: &'s [f64],
}

impl LinkerModel {
    pub fn init(
        surface: SurfaceConfig,
        scorer: &ScorerConfig,
        context_dim: usize,
        word_dim: usize,
        margin: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let surface = SurfaceEncoder::init(surface, rng)?;
        let entity_encoder = TripletEntityEncoder::init(word_dim, margin, rng);
        let scorer = ScorerParams::init(
            scorer,
            surface.config.surface_dim,
            context_dim,
            word_dim,
            rng,
        )?;
        Ok(Self {
            surface,
            scorer,
            entity_encoder,
        })
    }

    /// Traces the score node; `trainable` registers surface and scorer tensors.
    pub fn trace_pair<'a>(&'a self, tape: &mut Tape<'a>, trainable: bool, input: &PairInput) -> Result<NodeId> {
        let surface_base = trainable.then_some(0);
        let scorer_base = trainable.then_some(SCORER_BASE);
        let ms = self.surface.trace_surface(tape, surface_base, input.mention_text)?;
        let ctx = tape.input(input.context.to_vec());
        let m = self.scorer.trace_mention_embedding(tape, scorer_base, ms, ctx)?;
        let es = self.surface.trace_surface(tape, surface_base, input.entity_surface)?;
        let anchor = tape.input(input.anchor.to_vec());
        let e = self.scorer.trace_entity_embedding(tape, scorer_base, es, anchor)?;
        self.scorer.trace_score(tape, scorer_base, m, e)
    }

    pub fn score(&self, input: &PairInput) -> Result<f64> {
        let mut tape = Tape::new();
        let s = self.trace_pair(&mut tape, false, input)?;
        Ok(tape.scalar(s))
    }

    /// BCE of one pair, with gradients for every trainable tensor.
    pub fn pair_objective(&self, input: &PairInput, label: f64) -> Result<Evaluation> {
        self.scored_objective(input, label).map(|(_, e)| e)
    }

    /// Like [`Self::pair_objective`], also returning the forward score.
    pub fn scored_objective(&self, input: &PairInput, label: f64) -> Result<(f64, Evaluation)> {
        let mut tape = Tape::new();
        let s = self.trace_pair(&mut tape, true, input)?;
        let loss = tape.bce(s, label);
        let grads = tape.backward(loss)?.grads;
        let eval = Evaluation {
            loss: tape.scalar(loss),
            grads,
            kinks: tape.kinks().to_vec(),
        };
        Ok((tape.scalar(s), eval))
    }
}

impl Parameterized for LinkerModel {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut p = self.surface.parameters();
        p.extend(self.scorer.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.surface.parameters_mut();
        p.extend(self.scorer.parameters_mut());
        p
    }
}

/// The entity surface form (name or alias) closest to the mention text.
/// Ties keep the earlier form, so the canonical name wins.
pub fn best_surface_form<'e>(mention_text: &str, entity: &'e Entity) -> &'e str {
    let mut best = (entity.name.as_str(), f64::NEG_INFINITY);
    for form in entity.surface_forms() {
        let s = fuzzy_score(mention_text, form).map_or(0.0, |f| f.average);
        if s > best.1 {
            best = (form, s);
        }
    }
    best.0
}

/// Scores every candidate and picks the highest-scoring one that passes the
/// decision threshold (ties broken by ascending entity id).
pub fn link_mention(
    model: &LinkerModel,
    mention_index: usize,
    mention: &Mention,
    context: &SemanticVector,
    candidates: &[CandidatePair],
    kb: &KnowledgeBase,
    anchors: &HashMap<String, Vec<f64>>,
) -> Result<LinkDecision> {
    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let entity = kb
            .get(&c.entity_id)
            .ok_or_else(|| Error::UnknownEntity(c.entity_id.clone()))?;
        let anchor = anchors
            .get(&c.entity_id)
            .ok_or_else(|| Error::UnknownEntity(c.entity_id.clone()))?;
        let score = model.score(&PairInput {
            mention_text: &mention.text,
            context: &context.vector,
            entity_surface: best_surface_form(&mention.text, entity),
            anchor,
        })?;
        scored.push(CandidateScore {
            entity_id: c.entity_id.clone(),
            fuzzy_score: c.fuzzy_score,
            score,
        });
    }
    let by_rank = |a: &&CandidateScore, b: &&CandidateScore| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| b.entity_id.cmp(&a.entity_id))
    };
    let chosen = scored
        .iter()
        .filter(|c| model.scorer.decide(c.score))
        .max_by(by_rank);
    let best = scored.iter().max_by(by_rank);
    Ok(LinkDecision {
        mention_index,
        entity_id: chosen.map(|c| c.entity_id.clone()),
        score: chosen.or(best).map(|c| c.score),
        linked: chosen.is_some(),
        candidate_count: scored.len(),
        candidates: scored,
    })
}

/// Blocking plus scoring over one knowledge base.
pub struct Linker<'a> {
    model: &'a LinkerModel,
    kb: &'a KnowledgeBase,
    context: &'a dyn ContextEncoder,
    index: BlockingIndex,
    blocking: BlockingConfig,
    anchors: HashMap<String, Vec<f64>>,
}

impl<'a> Linker<'a> {
    pub fn new(
        model: &'a LinkerModel,
        kb: &'a KnowledgeBase,
        vectors: &WordVectors,
        context: &'a dyn ContextEncoder,
        blocking: BlockingConfig,
    ) -> Result<Self> {
        blocking.validate()?;
        if context.dim() != model.scorer.mention_proj.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "context vectors are {}-d, model expects {}",
                context.dim(),
                model.scorer.mention_proj.input_dim()
            )));
        }
        if vectors.dim() != model.entity_encoder.dim() {
            return Err(Error::ShapeMismatch(format!(
                "word vectors are {}-d, model expects {}",
                vectors.dim(),
                model.entity_encoder.dim()
            )));
        }
        Ok(Self {
            model,
            kb,
            context,
            index: BlockingIndex::new(kb),
            blocking,
            anchors: model.entity_encoder.encode_all(vectors, kb)?,
        })
    }

    pub fn candidates(&self, mention_index: usize, mention: &Mention) -> Result<Vec<CandidatePair>> {
        self.index.candidates(mention_index, &mention.text, &self.blocking)
    }

    pub fn link(&self, mention_index: usize, mention: &Mention) -> Result<LinkDecision> {
        let candidates = self.candidates(mention_index, mention)?;
        let ctx = self.context.encode(mention)?;
        link_mention(self.model, mention_index, mention, &ctx, &candidates, self.kb, &self.anchors)
    }

    pub fn link_all(&self, mentions: &[Mention]) -> Result<Vec<LinkDecision>> {
        mentions
            .par_iter()
            .enumerate()
            .map(|(i, m)| self.link(i, m))
            .collect()
    }

    pub fn anchor(&self, entity_id: &str) -> Option<&[f64]> {
        self.anchors.get(entity_id).map(Vec::as_slice)
    }
}
