//! Compatibility projections, fused pair embeddings and the comparison head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseIds, DenseLayer, NodeId, Parameterized, Rng, Tape};

pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    /// Output width of both compatibility projections.
    pub fusion_dim: usize,
    pub hidden_dim: usize,
    /// Identity instead of relu between the two head layers.
    pub linear_head: bool,
    pub decision_threshold: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            fusion_dim: 32,
            hidden_dim: 64,
            linear_head: false,
            decision_threshold: DEFAULT_DECISION_THRESHOLD,
        }
    }
}

pub const SCORER_PARAM_TENSORS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    /// context (d_ctx) → d_f
    pub mention_proj: DenseLayer,
    /// anchor (d_ent) → d_f
    pub entity_proj: DenseLayer,
    /// 2·(d_s + d_f) → h
    pub head_hidden: DenseLayer,
    /// h → 1, sigmoid
    pub head_out: DenseLayer,
    pub decision_threshold: f64,
}

impl ScorerParams {
    pub fn init(
        cfg: &ScorerConfig,
        surface_dim: usize,
        context_dim: usize,
        entity_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if cfg.fusion_dim == 0 || cfg.hidden_dim == 0 {
            return Err(Error::InvalidConfig("scorer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&cfg.decision_threshold) {
            return Err(Error::InvalidConfig(format!(
                "decision threshold {}",
                cfg.decision_threshold
            )));
        }
        let hidden_act = if cfg.linear_head {
            Activation::Identity
        } else {
            Activation::Relu
        };
        let joint = 2 * (surface_dim + cfg.fusion_dim);
        Ok(Self {
            mention_proj: DenseLayer::init(context_dim, cfg.fusion_dim, Activation::Identity, rng),
            entity_proj: DenseLayer::init(entity_dim, cfg.fusion_dim, Activation::Identity, rng),
            head_hidden: DenseLayer::init(joint, cfg.hidden_dim, hidden_act, rng),
            head_out: DenseLayer::init(cfg.hidden_dim, 1, Activation::Sigmoid, rng),
            decision_threshold: cfg.decision_threshold,
        })
    }

    pub fn fusion_dim(&self) -> usize {
        self.mention_proj.output_dim()
    }

    /// Length of a mention or entity embedding.
    pub fn embedding_dim(&self) -> usize {
        self.head_hidden.input_dim() / 2
    }

    pub fn trace_mention_embedding<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        base: Option<usize>,
        surface: NodeId,
        context: NodeId,
    ) -> Result<NodeId> {
        let projected = tape.dense(&self.mention_proj, base.map(DenseIds::at), context)?;
        Ok(tape.concat(&[surface, projected]))
    }

    pub fn trace_entity_embedding<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        base: Option<usize>,
        surface: NodeId,
        anchor: NodeId,
    ) -> Result<NodeId> {
        let projected = tape.dense(&self.entity_proj, base.map(|b| DenseIds::at(b + 2)), anchor)?;
        Ok(tape.concat(&[surface, projected]))
    }

    pub fn trace_score<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        base: Option<usize>,
        mention: NodeId,
        entity: NodeId,
    ) -> Result<NodeId> {
        let (lm, le) = (tape.value(mention).len(), tape.value(entity).len());
        if lm != self.embedding_dim() || le != self.embedding_dim() {
            return Err(Error::ShapeMismatch(format!(
                "pair embeddings of {lm} and {le}, head expects {}",
                self.embedding_dim()
            )));
        }
        let joint = tape.concat(&[mention, entity]);
        let hidden = tape.dense(&self.head_hidden, base.map(|b| DenseIds::at(b + 4)), joint)?;
        tape.dense(&self.head_out, base.map(|b| DenseIds::at(b + 6)), hidden)
    }

    /// `concat(surface, mention_proj(context))`
    pub fn mention_embedding(&self, surface: &[f64], context: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (s, c) = (tape.input(surface.to_vec()), tape.input(context.to_vec()));
        let out = self.trace_mention_embedding(&mut tape, None, s, c)?;
        Ok(tape.value(out).to_vec())
    }

    /// `concat(surface, entity_proj(anchor))`
    pub fn entity_embedding(&self, surface: &[f64], anchor: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (s, a) = (tape.input(surface.to_vec()), tape.input(anchor.to_vec()));
        let out = self.trace_entity_embedding(&mut tape, None, s, a)?;
        Ok(tape.value(out).to_vec())
    }

    /// `sigmoid(head(concat(mention, entity)))`
    pub fn score_pair(&self, mention: &[f64], entity: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let (m, e) = (tape.input(mention.to_vec()), tape.input(entity.to_vec()));
        let out = self.trace_score(&mut tape, None, m, e)?;
        Ok(tape.scalar(out))
    }

    /// Strictly greater than the decision threshold.
    pub fn decide(&self, score: f64) -> bool {
        score > self.decision_threshold
    }
}

impl Parameterized for ScorerParams {
    fn parameters(&self) -> Vec<&[f64]> {
        vec![
            self.mention_proj.weights.data(),
            &self.mention_proj.bias,
            self.entity_proj.weights.data(),
            &self.entity_proj.bias,
            self.head_hidden.weights.data(),
            &self.head_hidden.bias,
            self.head_out.weights.data(),
            &self.head_out.bias,
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.mention_proj.weights.data_mut(),
            &mut self.mention_proj.bias,
            self.entity_proj.weights.data_mut(),
            &mut self.entity_proj.bias,
            self.head_hidden.weights.data_mut(),
            &mut self.head_hidden.bias,
            self.head_out.weights.data_mut(),
            &mut self.head_out.bias,
        ]
    }
}
