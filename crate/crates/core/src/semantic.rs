//! Semantic vectors: mention context encoders and the triplet-trained entity
//! description encoder.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Entity, KnowledgeBase, Mention};
use crate::nn::{
    cosine_distance, sgd_step, Activation, DenseIds, DenseLayer, Evaluation, Gradients, NodeId,
    Parameterized, Rng, Tape, DEFAULT_TRIPLET_MARGIN,
};
use crate::vectors::WordVectors;

/// Whitespace tokens with surrounding punctuation stripped.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .collect()
}

/// A semantic vector plus whether any input token contributed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector {
    pub vector: Vec<f64>,
    /// `false` for empty or fully out-of-vocabulary input (vector is zero).
    pub informative: bool,
}

/// Produces the mention-side semantic vector.
pub trait ContextEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, mention: &Mention) -> Result<SemanticVector>;
}

/// Mean of the word vectors of the context tokens.
pub struct BagOfEmbeddings<'a> {
    vectors: &'a WordVectors,
}

impl<'a> BagOfEmbeddings<'a> {
    pub fn new(vectors: &'a WordVectors) -> Self {
        Self { vectors }
    }

    pub fn encode_context(&self, text: &str) -> SemanticVector {
        let (vector, found) = self.vectors.mean_pool_counted(&tokenize(text));
        SemanticVector {
            vector,
            informative: found > 0,
        }
    }
}

impl ContextEncoder for BagOfEmbeddings<'_> {
    fn dim(&self) -> usize {
        self.vectors.dim()
    }

    fn encode(&self, mention: &Mention) -> Result<SemanticVector> {
        Ok(self.encode_context(&mention.context))
    }
}

/// Vectors produced outside this crate, keyed by [`Mention::key`].
///
/// File format: a header line holding the dimension, then one
/// `key<TAB>v1 v2 … v_dim` line per record.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedVectors {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl PrecomputedVectors {
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::BadHeader("missing dimension line".into()))??;
        let dim: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::BadHeader(header.clone()))?;
        if dim == 0 {
            return Err(Error::BadHeader(header));
        }
        let mut table = HashMap::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: "expected key<TAB>values".into(),
            })?;
            let values = rest
                .split(' ')
                .filter(|p| !p.is_empty())
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedRecord {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(Error::DimMismatch {
                    line: line_no,
                    expected: dim,
                    found: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(line_no));
            }
            if table.insert(key.to_string(), values).is_some() {
                return Err(Error::DuplicateToken(key.to_string()));
            }
        }
        Ok(Self { dim, table })
    }

    pub fn get(&self, key: &str) -> Result<&[f64]> {
        self.table
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingVector(key.to_string()))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl ContextEncoder for PrecomputedVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, mention: &Mention) -> Result<SemanticVector> {
        let v = self.get(&mention.key())?;
        Ok(SemanticVector {
            vector: v.to_vec(),
            informative: true,
        })
    }
}

/// Maps a pooled description vector to an anchor in word-vector space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletEntityEncoder {
    pub desc_proj: DenseLayer,
    pub margin: f64,
}

impl TripletEntityEncoder {
    pub fn init(dim: usize, margin: f64, rng: &mut Rng) -> Self {
        Self {
            desc_proj: DenseLayer::init(dim, dim, Activation::Identity, rng),
            margin,
        }
    }

    pub fn dim(&self) -> usize {
        self.desc_proj.output_dim()
    }

    /// Anchor for an entity description; zero and uninformative when no
    /// description token is in the vocabulary.
    pub fn encode_entity_desc(&self, vectors: &WordVectors, entity: &Entity) -> Result<SemanticVector> {
        let (pooled, found) = vectors.mean_pool_counted(&tokenize(&entity.description));
        if found == 0 {
            return Ok(SemanticVector {
                vector: vec![0.0; self.dim()],
                informative: false,
            });
        }
        Ok(SemanticVector {
            vector: self.desc_proj.forward(&pooled)?,
            informative: true,
        })
    }

    /// Anchor for every entity, keyed by id.
    pub fn encode_all(&self, vectors: &WordVectors, kb: &KnowledgeBase) -> Result<HashMap<String, Vec<f64>>> {
        kb.iter()
            .map(|e| Ok((e.id.clone(), self.encode_entity_desc(vectors, e)?.vector)))
            .collect()
    }
}

impl Parameterized for TripletEntityEncoder {
    fn parameters(&self) -> Vec<&[f64]> {
        vec![self.desc_proj.weights.data(), &self.desc_proj.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.desc_proj.weights.data_mut(), &mut self.desc_proj.bias]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletExample {
    pub entity_id: String,
    pub positive_word: String,
    pub negative_word: String,
}

/// Up to `k` triplets per entity: positives are the top TF-IDF description
/// tokens that have vectors; each negative is drawn from other entities'
/// in-vocabulary description tokens, redrawn while it occurs in this description.
pub fn build_triplets(
    kb: &KnowledgeBase,
    vectors: &WordVectors,
    rng: &mut Rng,
    k: usize,
) -> Result<Vec<TripletExample>> {
    const MAX_REDRAWS: usize = 100;

    let docs: Vec<(&Entity, BTreeMap<&str, usize>)> = kb
        .iter()
        .filter(|e| !e.description.is_empty())
        .map(|e| {
            let mut tf = BTreeMap::new();
            for t in tokenize(&e.description) {
                *tf.entry(t).or_insert(0) += 1;
            }
            (e, tf)
        })
        .collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, tf) in &docs {
        for t in tf.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let pool: Vec<&str> = df.keys().copied().filter(|t| vectors.contains(t)).collect();
    let n_docs = docs.len() as f64;

    let mut out = Vec::new();
    for (entity, tf) in &docs {
        let total: usize = tf.values().sum();
        let mut scored: Vec<(f64, &str)> = tf
            .iter()
            .filter(|(t, _)| vectors.contains(t))
            .map(|(t, &c)| {
                let idf = ((1.0 + n_docs) / (1.0 + df[t] as f64)).ln() + 1.0;
                (c as f64 / total as f64 * idf, *t)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let own: BTreeSet<&str> = tf.keys().copied().collect();
        for (_, positive) in scored.into_iter().take(k) {
            let negative = (0..MAX_REDRAWS)
                .map(|_| pool[rng.below(pool.len())])
                .find(|t| !own.contains(t));
            if let Some(negative) = negative {
                out.push(TripletExample {
                    entity_id: entity.id.clone(),
                    positive_word: positive.to_string(),
                    negative_word: negative.to_string(),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoEligibleEntities);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletConfig {
    /// Triplets per entity.
    pub per_entity: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub margin: f64,
}

impl Default for TripletConfig {
    fn default() -> Self {
        Self {
            per_entity: 5,
            epochs: 200,
            lr: 0.01,
            batch_size: 1,
            margin: DEFAULT_TRIPLET_MARGIN,
        }
    }
}

/// A triplet with its input vectors resolved.
struct ResolvedTriplet {
    pooled: Vec<f64>,
    positive: Vec<f64>,
    negative: Vec<f64>,
}

fn resolve(
    kb: &KnowledgeBase,
    vectors: &WordVectors,
    triplets: &[TripletExample],
) -> Result<Vec<ResolvedTriplet>> {
    let mut pooled_cache: HashMap<&str, Vec<f64>> = HashMap::new();
    triplets
        .iter()
        .map(|t| {
            let pooled = match pooled_cache.get(t.entity_id.as_str()) {
                Some(p) => p.clone(),
                None => {
                    let e = kb
                        .get(&t.entity_id)
                        .ok_or_else(|| Error::UnknownEntity(t.entity_id.clone()))?;
                    let p = vectors.mean_pool(&tokenize(&e.description));
                    pooled_cache.insert(&t.entity_id, p.clone());
                    p
                }
            };
            Ok(ResolvedTriplet {
                pooled,
                positive: vectors.lookup(&t.positive_word).0.to_vec(),
                negative: vectors.lookup(&t.negative_word).0.to_vec(),
            })
        })
        .collect()
}

/// Traces `max(0, d(anchor, p) − d(anchor, n) + margin)`.
fn trace_triplet<'a>(
    enc: &'a TripletEntityEncoder,
    tape: &mut Tape<'a>,
    trainable: bool,
    t: &ResolvedTriplet,
) -> Result<NodeId> {
    let x = tape.input(t.pooled.clone());
    let anchor = tape.dense(&enc.desc_proj, trainable.then(|| DenseIds::at(0)), x)?;
    let p = tape.input(t.positive.clone());
    let n = tape.input(t.negative.clone());
    let dp = tape.cosine_distance(anchor, p)?;
    let dn = tape.cosine_distance(anchor, n)?;
    let diff = tape.sub(dp, dn)?;
    let shifted = tape.add_scalar(diff, enc.margin);
    Ok(tape.relu(shifted))
}

/// Mean triplet loss and gradients over `triplets`, for gradient checking.
pub fn triplet_objective(
    enc: &TripletEntityEncoder,
    kb: &KnowledgeBase,
    vectors: &WordVectors,
    triplets: &[TripletExample],
) -> Result<Evaluation> {
    let resolved = resolve(kb, vectors, triplets)?;
    let mut grads = Gradients::new();
    let mut loss = 0.0;
    let mut kinks = Vec::new();
    let scale = 1.0 / resolved.len().max(1) as f64;
    for t in &resolved {
        let mut tape = Tape::new();
        let l = trace_triplet(enc, &mut tape, true, t)?;
        loss += tape.scalar(l) * scale;
        grads.accumulate(&tape.backward(l)?.grads, scale);
        kinks.extend_from_slice(tape.kinks());
    }
    Ok(Evaluation { loss, grads, kinks })
}

/// SGD on the triplet loss. Returns the mean loss of each epoch.
pub fn train_triplet(
    enc: &mut TripletEntityEncoder,
    kb: &KnowledgeBase,
    vectors: &WordVectors,
    triplets: &[TripletExample],
    cfg: &TripletConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if triplets.is_empty() {
        return Err(Error::NoEligibleEntities);
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(cfg.margin > 0.0) {
        return Err(Error::InvalidConfig("triplet training needs batch_size, lr, margin > 0".into()));
    }
    if enc.dim() != vectors.dim() || enc.desc_proj.input_dim() != vectors.dim() {
        return Err(Error::ShapeMismatch(format!(
            "entity encoder is {}-d, word vectors are {}-d",
            enc.dim(),
            vectors.dim()
        )));
    }
    enc.margin = cfg.margin;
    let resolved = resolve(kb, vectors, triplets)?;
    let mut order: Vec<usize> = (0..resolved.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::new();
            for &i in batch {
                let mut tape = Tape::new();
                let l = trace_triplet(enc, &mut tape, true, &resolved[i])?;
                epoch_loss += tape.scalar(l);
                grads.accumulate(&tape.backward(l)?.grads, 1.0 / batch.len() as f64);
            }
            sgd_step(enc, &grads, cfg.lr)?;
        }
        history.push(epoch_loss / resolved.len() as f64);
    }
    Ok(history)
}

/// Fraction of triplets with `d(a, p) + margin ≤ d(a, n)`.
pub fn triplet_success_rate(
    enc: &TripletEntityEncoder,
    kb: &KnowledgeBase,
    vectors: &WordVectors,
    triplets: &[TripletExample],
    margin: f64,
) -> Result<f64> {
    if triplets.is_empty() {
        return Ok(0.0);
    }
    let mut ok = 0usize;
    for t in triplets {
        let e = kb
            .get(&t.entity_id)
            .ok_or_else(|| Error::UnknownEntity(t.entity_id.clone()))?;
        let a = enc.encode_entity_desc(vectors, e)?.vector;
        let dp = cosine_distance(&a, vectors.lookup(&t.positive_word).0)?;
        let dn = cosine_distance(&a, vectors.lookup(&t.negative_word).0)?;
        if dp + margin <= dn {
            ok += 1;
        }
    }
    Ok(ok as f64 / triplets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_entities;
    use crate::nn::{grad_check, Tensor2};
    use crate::vectors::load_word_vectors;

    fn vectors() -> WordVectors {
        load_word_vectors(
            "4 3\nfinance 1 0.2 0\nmilitary -0.1 1 0.3\nbank 0.8 0.1 0.1\narmy 0 0.9 0.4\n".as_bytes(),
        )
        .unwrap()
    }

    fn finance_military() -> KnowledgeBase {
        load_entities(
            r#"{"id":"e1","name":"Jo Adam","description":"Finance"}
{"id":"e2","name":"Jim Bond","description":"Military"}
"#
            .as_bytes(),
        )
        .unwrap()
    }

    fn mention(context: &str) -> Mention {
        Mention {
            doc_id: "d1".into(),
            text: "joe adam".into(),
            context: context.into(),
            gold_id: None,
        }
    }

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(tokenize("...the government, needs \"x\" -- now."), ["the", "government", "needs", "x", "now"]);
    }

    #[test]
    fn bag_of_embeddings() {
        let wv = load_word_vectors("2 2\nv1 1 0\nv2 0 1\n".as_bytes()).unwrap();
        let enc = BagOfEmbeddings::new(&wv);
        assert_eq!(enc.encode_context("v1").vector, vec![1.0, 0.0]);
        assert_eq!(enc.encode_context("v1 v2").vector, vec![0.5, 0.5]);
        let empty = enc.encode(&mention("")).unwrap();
        assert_eq!(empty, SemanticVector { vector: vec![0.0, 0.0], informative: false });
        assert_eq!(enc.dim(), 2);
    }

    #[test]
    fn precomputed_lookup_and_miss() {
        let src = "3\nd1|joe adam\t0.1 0.2 0.3\nd2|x\t1 1 1\n";
        let pre = PrecomputedVectors::load(src.as_bytes()).unwrap();
        assert_eq!(pre.dim(), 3);
        assert_eq!(pre.encode(&mention("anything")).unwrap().vector, vec![0.1, 0.2, 0.3]);
        let mut other = mention("");
        other.doc_id = "zz".into();
        assert_eq!(pre.encode(&other), Err(Error::MissingVector("zz|joe adam".into())));
        assert!(matches!(
            PrecomputedVectors::load("3\nk\t1 2\n".as_bytes()),
            Err(Error::DimMismatch { line: 2, .. })
        ));
        assert!(PrecomputedVectors::load("x\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_description_is_flagged_zero() {
        let wv = vectors();
        let enc = TripletEntityEncoder::init(3, 0.2, &mut Rng::new(1));
        let e = Entity {
            id: "e".into(),
            name: "x".into(),
            aliases: vec![],
            description: String::new(),
        };
        let v = enc.encode_entity_desc(&wv, &e).unwrap();
        assert_eq!(v, SemanticVector { vector: vec![0.0; 3], informative: false });
    }

    #[test]
    fn zero_weights_give_bias() {
        let wv = vectors();
        let enc = TripletEntityEncoder {
            desc_proj: DenseLayer::new(Tensor2::zeros(3, 3), vec![0.1, -0.2, 0.3], Activation::Identity).unwrap(),
            margin: 0.2,
        };
        let kb = finance_military();
        let v = enc.encode_entity_desc(&wv, kb.get("e1").unwrap()).unwrap();
        assert_eq!(v.vector, vec![0.1, -0.2, 0.3]);
        assert_eq!(v, enc.encode_entity_desc(&wv, kb.get("e1").unwrap()).unwrap());
    }

    #[test]
    fn finance_military_triplets() {
        let kb = finance_military();
        let t = build_triplets(&kb, &vectors(), &mut Rng::new(3), 5).unwrap();
        assert_eq!(
            t,
            vec![
                TripletExample {
                    entity_id: "e1".into(),
                    positive_word: "finance".into(),
                    negative_word: "military".into()
                },
                TripletExample {
                    entity_id: "e2".into(),
                    positive_word: "military".into(),
                    negative_word: "finance".into()
                },
            ]
        );
    }

    #[test]
    fn oov_description_contributes_nothing() {
        let kb = load_entities(
            r#"{"id":"e1","name":"a","description":"finance"}
{"id":"e2","name":"b","description":"zzz qqq"}
{"id":"e3","name":"c","description":"army"}
"#
            .as_bytes(),
        )
        .unwrap();
        let t = build_triplets(&kb, &vectors(), &mut Rng::new(3), 5).unwrap();
        assert!(t.iter().all(|t| t.entity_id != "e2"));
        let again = build_triplets(&kb, &vectors(), &mut Rng::new(3), 5).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn no_eligible_entities() {
        let kb = load_entities(r#"{"id":"e1","name":"a","description":"zzz"}"#.as_bytes()).unwrap();
        assert_eq!(build_triplets(&kb, &vectors(), &mut Rng::new(0), 3), Err(Error::NoEligibleEntities));
    }

    #[test]
    fn zero_epochs_leave_parameters() {
        let kb = finance_military();
        let wv = vectors();
        let t = build_triplets(&kb, &wv, &mut Rng::new(3), 1).unwrap();
        let mut enc = TripletEntityEncoder::init(3, 0.2, &mut Rng::new(5));
        let before = enc.clone();
        let cfg = TripletConfig { epochs: 0, ..TripletConfig::default() };
        let h = train_triplet(&mut enc, &kb, &wv, &t, &cfg, &mut Rng::new(1)).unwrap();
        assert!(h.is_empty());
        assert_eq!(enc, before);
    }

    #[test]
    fn triplet_gradients_check() {
        let kb = finance_military();
        let wv = vectors();
        let t = build_triplets(&kb, &wv, &mut Rng::new(3), 1).unwrap();
        let mut enc = TripletEntityEncoder::init(3, 0.2, &mut Rng::new(12));
        // push the hinge into its active region
        enc.margin = 2.5;
        let r = grad_check(&mut enc, 1e-5, |e| triplet_objective(e, &kb, &wv, &t)).unwrap();
        assert!(r.checked > 0);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
