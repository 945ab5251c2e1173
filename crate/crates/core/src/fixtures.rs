//! Built-in corpora: a three-entity demo, a synthetic same-name corpus with
//! topic word vectors, a disjoint-topic triplet corpus and small two-entity
//! probes.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::model::{normalize, Entity, KnowledgeBase, Mention};
use crate::nn::Rng;
use crate::vectors::{load_word_vectors, WordVectors};

pub const SYNTHETIC_DIM: usize = 50;

pub const TOPICS: [(&str, [&str; 15]); 6] = [
    (
        "politics",
        [
            "parliament", "minister", "election", "government", "policy", "vote", "senator",
            "campaign", "cabinet", "legislation", "party", "brexit", "constituency", "mp", "referendum",
        ],
    ),
    (
        "farming",
        [
            "farm", "cattle", "harvest", "crops", "tractor", "livestock", "dairy", "wheat", "barn",
            "agriculture", "sheep", "ranch", "orchard", "fertilizer", "pasture",
        ],
    ),
    (
        "finance",
        [
            "bank", "stocks", "investment", "market", "shares", "fund", "trading", "equity", "bonds",
            "profit", "banker", "dividend", "portfolio", "hedge", "earnings",
        ],
    ),
    (
        "military",
        [
            "army", "soldier", "general", "troops", "battle", "defense", "navy", "regiment",
            "missile", "war", "commander", "infantry", "veteran", "brigade", "artillery",
        ],
    ),
    (
        "film",
        [
            "director", "movie", "cinema", "actor", "screenplay", "studio", "premiere", "oscar",
            "film", "hollywood", "camera", "sequel", "producer", "audience", "festival",
        ],
    ),
    (
        "sports",
        [
            "football", "coach", "league", "goal", "championship", "stadium", "athlete", "season",
            "tournament", "striker", "club", "match", "olympic", "team", "trophy",
        ],
    ),
];

/// Context filler shared by every topic.
pub const GENERIC_WORDS: [&str; 10] = [
    "said", "today", "reported", "new", "year", "people", "week", "according", "told", "also",
];

pub const NAMES: [&str; 25] = [
    "david davis", "joseph adam", "maria lopez", "john smith", "anna berg", "peter novak",
    "laura chen", "mark wilson", "sofia rossi", "james walker", "emma fischer", "lucas martin",
    "olivia brown", "henry clark", "nina petrova", "samuel green", "clara jensen", "victor lang",
    "grace kim", "omar haddad", "ruth cohen", "paul meyer", "irene costa", "daniel moore",
    "helen ward",
];

fn entity(id: &str, name: &str, aliases: &[&str], description: &str) -> Entity {
    Entity {
        id: id.to_string(),
        name: normalize(name),
        aliases: aliases.iter().map(|a| normalize(a)).collect(),
        description: normalize(description),
    }
}

fn kb_of(entities: Vec<Entity>) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for e in entities {
        kb.insert(e).expect("fixture ids are unique");
    }
    kb
}

fn mention(doc_id: &str, text: &str, context: &str, gold: Option<&str>) -> Mention {
    Mention {
        doc_id: doc_id.to_string(),
        text: normalize(text),
        context: normalize(context),
        gold_id: gold.map(str::to_string),
    }
}

/// Three people and one mention, `"joe adam"`.
pub fn demo_corpus() -> (KnowledgeBase, Vec<Mention>) {
    let kb = kb_of(vec![
        entity("Q1", "Joseph Adam", &[], "investment banker at a london bank"),
        entity("Q2", "Elon Musk", &[], "engineer and founder of electric car company"),
        entity("Q3", "Bill Gates", &[], "software company founder and philanthropist"),
    ]);
    let mentions = vec![mention("doc1", "joe adam", "the banker joe adam said shares fell", None)];
    (kb, mentions)
}

/// A corpus with word vectors and gold-labeled mentions.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub kb: KnowledgeBase,
    pub mentions: Vec<Mention>,
    pub vectors: WordVectors,
}

impl Corpus {
    /// Writes `entities.jsonl`, `mentions.jsonl` and `vectors.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.kb.write_jsonl(fs::File::create(dir.join("entities.jsonl"))?)?;
        crate::model::write_mentions(&self.mentions, fs::File::create(dir.join("mentions.jsonl"))?)?;
        self.vectors.write_text(fs::File::create(dir.join("vectors.txt"))?)?;
        Ok(())
    }
}

fn unit_gaussian(rng: &mut Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Builds vectors for clustered vocabularies: every word is its cluster's
/// unit centroid plus Gaussian noise of the given scale. The result is passed
/// through the text format so it equals what a reload of the file yields.
fn clustered_vectors<'w>(
    clusters: impl IntoIterator<Item = (Vec<&'w str>, f64, f64)>,
    dim: usize,
    rng: &mut Rng,
) -> WordVectors {
    let mut wv = WordVectors::new(dim).expect("positive dim");
    for (words, centroid_scale, noise) in clusters {
        let c = unit_gaussian(rng, dim);
        for w in words {
            let v: Vec<f64> = c
                .iter()
                .map(|x| centroid_scale * x + noise * rng.normal() / (dim as f64).sqrt())
                .collect();
            wv.insert(w, &v).expect("fixture words are unique");
        }
    }
    let mut text = Vec::new();
    wv.write_text(&mut text).expect("in-memory write");
    load_word_vectors(text.as_slice()).expect("round trip of generated vectors")
}

fn topic_vectors(rng: &mut Rng) -> WordVectors {
    let mut clusters: Vec<(Vec<&str>, f64, f64)> =
        TOPICS.iter().map(|(_, words)| (words.to_vec(), 1.0, 0.35)).collect();
    clusters.push((GENERIC_WORDS.to_vec(), 0.0, 0.3));
    clustered_vectors(clusters, SYNTHETIC_DIM, rng)
}

/// Distinct topic indices for the two entities sharing name `i`.
/// Name 0 is politics vs farming.
fn topic_pair(i: usize) -> (usize, usize) {
    let a = i % TOPICS.len();
    let b = (a + 1 + (i / TOPICS.len()) % (TOPICS.len() - 1)) % TOPICS.len();
    (a, b)
}

fn pick<'a>(words: &[&'a str], n: usize, rng: &mut Rng) -> Vec<&'a str> {
    let mut w = words.to_vec();
    rng.shuffle(&mut w);
    w.truncate(n);
    w
}

fn description(topic: usize, rng: &mut Rng) -> String {
    pick(&TOPICS[topic].1, 8, rng).join(" ")
}

/// Five topic words and one filler word, shuffled.
pub fn topic_context(topic: usize, rng: &mut Rng) -> String {
    let mut words = pick(&TOPICS[topic].1, 5, rng);
    words.push(GENERIC_WORDS[rng.below(GENERIC_WORDS.len())]);
    rng.shuffle(&mut words);
    words.join(" ")
}

/// Name variants used as mention text: exact, initial + surname, a dropped
/// surname letter, and swapped word order.
fn variant(name: &str, kind: usize, rng: &mut Rng) -> String {
    let (first, last) = name.split_once(' ').expect("two-word fixture names");
    match kind {
        0 | 1 => name.to_string(),
        2 => format!("{}. {last}", &first[..1]),
        3 => {
            let mut chars: Vec<char> = last.chars().collect();
            let at = 1 + rng.below(chars.len() - 1);
            chars.remove(at);
            format!("{first} {}", chars.into_iter().collect::<String>())
        }
        _ => format!("{last} {first}"),
    }
}

pub fn synthetic_entity_id(name_index: usize, twin: usize) -> String {
    format!("E{:02}{}", name_index, ['a', 'b'][twin])
}

/// 25 names, each shared by two entities with different topic descriptions
/// (50 entities), and two gold-labeled mentions per entity (100 mentions)
/// whose contexts are drawn from the entity's topic. About 40% of mention
/// texts are exact names.
pub fn synthetic_corpus(seed: u64) -> Corpus {
    let root = Rng::new(seed);
    let vectors = topic_vectors(&mut root.fork(0));
    let mut rng = root.fork(1);
    let mut entities = Vec::new();
    let mut mentions = Vec::new();
    let mut k = 0;
    for (i, name) in NAMES.iter().enumerate() {
        let (a, b) = topic_pair(i);
        for (twin, topic) in [a, b].into_iter().enumerate() {
            let id = synthetic_entity_id(i, twin);
            entities.push(entity(&id, &title_case(name), &[], &description(topic, &mut rng)));
            for _ in 0..2 {
                let text = variant(name, k % 5, &mut rng);
                let ctx = topic_context(topic, &mut rng);
                mentions.push(mention(&format!("doc{k:03}"), &text, &ctx, Some(&id)));
                k += 1;
            }
        }
    }
    Corpus {
        kb: kb_of(entities),
        mentions,
        vectors,
    }
}

fn title_case(name: &str) -> String {
    name.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Id of the politics-description "David Davis" in [`synthetic_corpus`].
pub fn david_davis_politics_id() -> String {
    synthetic_entity_id(0, 0)
}

/// Id of the farming-description "David Davis" in [`synthetic_corpus`].
pub fn david_davis_farm_id() -> String {
    synthetic_entity_id(0, 1)
}

/// A fresh politics-context mention of "david davis", not part of the corpus.
pub fn david_davis_probe(seed: u64) -> Mention {
    let mut rng = Rng::new(seed).fork(2);
    let ctx = format!("{} {}", topic_context(0, &mut rng), "westminster");
    mention("probe", "David Davis", &ctx, Some(&david_davis_politics_id()))
}

/// `n` entities, each with a disjoint six-word vocabulary used as its
/// description. Words are `t{entity}w{j}`.
pub fn triplet_corpus(n: usize, seed: u64) -> (KnowledgeBase, WordVectors) {
    let mut rng = Rng::new(seed);
    let vocab: Vec<Vec<String>> = (0..n)
        .map(|t| (0..6).map(|j| format!("t{t}w{j}")).collect())
        .collect();
    let vectors = clustered_vectors(
        vocab
            .iter()
            .map(|words| (words.iter().map(String::as_str).collect(), 1.0, 0.35)),
        SYNTHETIC_DIM,
        &mut rng,
    );
    let entities = vocab
        .iter()
        .enumerate()
        .map(|(t, words)| entity(&format!("T{t:02}"), &format!("topic owner {t}"), &[], &words.join(" ")))
        .collect();
    (kb_of(entities), vectors)
}

/// Two entities described by a single word each, "finance" and "military",
/// with vectors for both topic clusters.
pub fn finance_military(seed: u64) -> (KnowledgeBase, WordVectors) {
    let kb = kb_of(vec![
        entity("F1", "Jo Adam", &[], "Finance"),
        entity("M1", "Jim Bond", &[], "Military"),
    ]);
    let mut finance = vec!["finance"];
    finance.extend_from_slice(&TOPICS[2].1[..6]);
    let mut military = vec!["military"];
    military.extend_from_slice(&TOPICS[3].1[..6]);
    let vectors = clustered_vectors(
        [(finance, 1.0, 0.35), (military, 1.0, 0.35)],
        SYNTHETIC_DIM,
        &mut Rng::new(seed),
    );
    (kb, vectors)
}
