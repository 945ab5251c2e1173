//! Hierarchical surface encoding of names: characters → words → one name vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseIds, DenseLayer, NodeId, ParamId, Parameterized, Rng, Tape, Tensor2};

/// Characters with their own embedding row; anything else shares the OOV row.
pub const CHAR_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789 '-.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
}

impl Default for CharVocab {
    fn default() -> Self {
        Self {
            chars: CHAR_ALPHABET.chars().collect(),
        }
    }
}

impl CharVocab {
    /// Number of embedding rows, including the OOV row.
    pub fn size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn oov(&self) -> usize {
        self.chars.len()
    }

    pub fn index(&self, c: char) -> usize {
        self.chars
            .iter()
            .position(|&v| v == c)
            .unwrap_or_else(|| self.oov())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub max_chars: usize,
    pub max_words: usize,
    pub char_dim: usize,
    pub word_dim: usize,
    pub surface_dim: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            max_chars: 16,
            max_words: 6,
            char_dim: 16,
            word_dim: 32,
            surface_dim: 32,
        }
    }
}

impl SurfaceConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.max_chars,
            self.max_words,
            self.char_dim,
            self.word_dim,
            self.surface_dim,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("surface dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Number of parameter tensors a [`SurfaceEncoder`] contributes.
pub const SURFACE_PARAM_TENSORS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEncoder {
    pub config: SurfaceConfig,
    /// One row per vocabulary slot. The padding slot is not stored: it is the
    /// constant zero vector and never receives gradient.
    pub char_table: Tensor2,
    /// `max_chars · char_dim → word_dim`
    pub word_proj: DenseLayer,
    /// `word_dim → surface_dim`, applied to the mean word vector.
    pub entity_pool: DenseLayer,
    #[serde(skip)]
    vocab: CharVocab,
}

impl SurfaceEncoder {
    pub fn init(config: SurfaceConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let vocab = CharVocab::default();
        let r = (6.0 / (vocab.size() + config.char_dim) as f64).sqrt();
        let table: Vec<f64> = (0..vocab.size() * config.char_dim)
            .map(|_| rng.uniform(-r, r))
            .collect();
        Ok(Self {
            config,
            char_table: Tensor2::from_vec(vocab.size(), config.char_dim, table)?,
            word_proj: DenseLayer::init(
                config.max_chars * config.char_dim,
                config.word_dim,
                Activation::Tanh,
                rng,
            ),
            entity_pool: DenseLayer::init(config.word_dim, config.surface_dim, Activation::Tanh, rng),
            vocab,
        })
    }

    /// All-zero parameters.
    pub fn zeros(config: SurfaceConfig) -> Result<Self> {
        config.validate()?;
        let vocab = CharVocab::default();
        Ok(Self {
            config,
            char_table: Tensor2::zeros(vocab.size(), config.char_dim),
            word_proj: DenseLayer::zeros(config.max_chars * config.char_dim, config.word_dim, Activation::Tanh),
            entity_pool: DenseLayer::zeros(config.word_dim, config.surface_dim, Activation::Tanh),
            vocab,
        })
    }

    /// Checks every tensor against `config`.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let ok = self.char_table.rows() == self.vocab.size()
            && self.char_table.cols() == c.char_dim
            && self.word_proj.input_dim() == c.max_chars * c.char_dim
            && self.word_proj.output_dim() == c.word_dim
            && self.entity_pool.input_dim() == c.word_dim
            && self.entity_pool.output_dim() == c.surface_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("surface encoder tensors disagree with config".into()))
        }
    }

    pub fn vocab(&self) -> &CharVocab {
        &self.vocab
    }

    /// Traces one word. `base` is the id of `char_table`; `None` freezes the encoder.
    pub fn trace_word<'a>(&'a self, tape: &mut Tape<'a>, base: Option<usize>, word: &str) -> Result<NodeId> {
        if word.is_empty() {
            return Err(Error::EmptyWord);
        }
        let table_id = base.map(ParamId);
        let mut slots = Vec::with_capacity(self.config.max_chars);
        let mut pad = None;
        let mut chars = word.chars();
        for _ in 0..self.config.max_chars {
            let node = match chars.next() {
                Some(c) => tape.gather(&self.char_table, table_id, self.vocab.index(c)),
                None => *pad.get_or_insert_with(|| tape.input(vec![0.0; self.config.char_dim])),
            };
            slots.push(node);
        }
        let joined = tape.concat(&slots);
        tape.dense(&self.word_proj, base.map(|b| DenseIds::at(b + 1)), joined)
    }

    /// Traces a whole name: mean over the first `max_words` word vectors, then `entity_pool`.
    pub fn trace_surface<'a>(&'a self, tape: &mut Tape<'a>, base: Option<usize>, name: &str) -> Result<NodeId> {
        let words: Vec<NodeId> = name
            .split_whitespace()
            .take(self.config.max_words)
            .map(|w| self.trace_word(tape, base, w))
            .collect::<Result<_>>()?;
        if words.is_empty() {
            return Err(Error::EmptySurface);
        }
        let pooled = tape.mean(&words)?;
        tape.dense(&self.entity_pool, base.map(|b| DenseIds::at(b + 3)), pooled)
    }

    pub fn encode_word(&self, word: &str) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let n = self.trace_word(&mut tape, None, word)?;
        Ok(tape.value(n).to_vec())
    }

    pub fn encode_surface(&self, name: &str) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let n = self.trace_surface(&mut tape, None, name)?;
        Ok(tape.value(n).to_vec())
    }
}

impl Parameterized for SurfaceEncoder {
    fn parameters(&self) -> Vec<&[f64]> {
        vec![
            self.char_table.data(),
            self.word_proj.weights.data(),
            &self.word_proj.bias,
            self.entity_pool.weights.data(),
            &self.entity_pool.bias,
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.char_table.data_mut(),
            self.word_proj.weights.data_mut(),
            &mut self.word_proj.bias,
            self.entity_pool.weights.data_mut(),
            &mut self.entity_pool.bias,
        ]
    }
}
