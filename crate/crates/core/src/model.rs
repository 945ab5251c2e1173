//! Knowledge-base entities, mentions and the records passed between pipeline stages.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC, lowercase, collapse whitespace runs to one space, trim.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().flat_map(char::to_lowercase).collect();
    // Lowercasing can produce decomposed sequences (e.g. U+0130), so recompose.
    let composed: String = lowered.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub description: String,
}

impl Entity {
    /// Canonical name followed by every alias.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_id: Option<String>,
}

impl Mention {
    /// Key used to look the mention up in precomputed vector files.
    pub fn key(&self) -> String {
        format!("{}|{}", self.doc_id, self.text)
    }
}

/// Entities in insertion order, indexed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    entities: Vec<Entity>,
    index: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a normalized entity, rejecting duplicate ids and empty names.
    pub fn insert(&mut self, entity: Entity) -> Result<()> {
        if entity.id.is_empty() {
            return Err(Error::MalformedRecord {
                line: self.entities.len() + 1,
                reason: "empty id".into(),
            });
        }
        if entity.name.is_empty() {
            return Err(Error::EmptyName(entity.id));
        }
        if self.index.contains_key(&entity.id) {
            return Err(Error::DuplicateId(entity.id));
        }
        self.index.insert(entity.id.clone(), self.entities.len());
        self.entities.push(entity);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.index.get(id).map(|&i| &self.entities[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Entity> {
        self.entities.iter()
    }

    /// Writes one JSON object per entity, in insertion order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entities {
            let line = serde_json::to_string(e).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a KnowledgeBase {
    type Item = &'a Entity;
    type IntoIter = std::slice::Iter<'a, Entity>;

    fn into_iter(self) -> Self::IntoIter {
        self.entities.iter()
    }
}

/// A (mention, entity) pair that survived blocking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub mention_index: usize,
    pub entity_id: String,
    pub fuzzy_score: f64,
}

/// Per-candidate detail reported by `link --explain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub entity_id: String,
    pub fuzzy_score: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDecision {
    pub mention_index: usize,
    /// Chosen entity; `None` when no candidate passed the decision threshold.
    pub entity_id: Option<String>,
    /// Score of the chosen entity, or of the best rejected candidate.
    pub score: Option<f64>,
    pub linked: bool,
    pub candidate_count: usize,
    pub candidates: Vec<CandidateScore>,
}

fn parse_lines<T, R, F>(source: R, mut f: F) -> Result<Vec<T>>
where
    R: BufRead,
    F: FnMut(usize, &str) -> Result<T>,
{
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(f(line_no, &line)?);
    }
    Ok(out)
}

fn parse_json<T: serde::de::DeserializeOwned>(line_no: usize, line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
        line: line_no,
        reason: e.to_string(),
    })
}

/// Loads a JSONL entity stream. Any duplicate id rejects the whole load.
pub fn load_entities<R: BufRead>(source: R) -> Result<KnowledgeBase> {
    let records: Vec<Entity> = parse_lines(source, |line_no, line| {
        let raw: Entity = parse_json(line_no, line)?;
        if raw.id.trim().is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "empty id".into(),
            });
        }
        Ok(Entity {
            id: raw.id,
            name: normalize(&raw.name),
            aliases: raw
                .aliases
                .iter()
                .map(|a| normalize(a))
                .filter(|a| !a.is_empty())
                .collect(),
            description: normalize(&raw.description),
        })
    })?;
    let mut kb = KnowledgeBase::new();
    for e in records {
        kb.insert(e)?;
    }
    Ok(kb)
}

/// Loads a JSONL mention stream, preserving input order.
pub fn load_mentions<R: BufRead>(source: R) -> Result<Vec<Mention>> {
    parse_lines(source, |line_no, line| {
        let raw: Mention = parse_json(line_no, line)?;
        let text = normalize(&raw.text);
        if text.is_empty() {
            return Err(Error::EmptyMentionText(line_no));
        }
        Ok(Mention {
            doc_id: raw.doc_id,
            text,
            context: normalize(&raw.context),
            gold_id: raw.gold_id.filter(|g| !g.is_empty()),
        })
    })
}

pub fn write_mentions<W: Write>(mentions: &[Mention], mut out: W) -> Result<()> {
    for m in mentions {
        let line = serde_json::to_string(m).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
