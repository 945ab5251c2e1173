//! Cosine (character bigrams), Levenshtein and Jaro similarity, and their average.
//!
//! All functions operate on Unicode scalar values of already-normalized text.

use serde::{Deserialize, Serialize};
use rapidfuzz::distance::levenshtein;

use crate::error::{Error, Result};

/// The three component similarities and their arithmetic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyScore {
    pub cosine: f64,
    pub levenshtein: f64,
    pub jaro: f64,
    pub average: f64,
}

impl FuzzyScore {
    fn new(cosine: f64, levenshtein: f64, jaro: f64) -> Self {
        Self {
            cosine,
            levenshtein,
            jaro,
            average: (cosine + levenshtein + jaro) / 3.0,
        }
    }
}

/// A string pre-split into characters with its bigram count vector, so that
/// one side of a comparison can be reused across many partners.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedText {
    chars: Vec<char>,
    /// Sorted `(bigram key, count)` pairs.
    bigrams: Vec<(u64, u32)>,
    /// Squared norm of the bigram count vector.
    norm_sq: u64,
}

impl PreparedText {
    pub fn new(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let mut keys: Vec<u64> = chars
            .windows(2)
            .map(|w| ((w[0] as u64) << 32) | w[1] as u64)
            .collect();
        keys.sort_unstable();
        let mut bigrams: Vec<(u64, u32)> = Vec::with_capacity(keys.len());
        for k in keys {
            match bigrams.last_mut() {
                Some((last, n)) if *last == k => *n += 1,
                _ => bigrams.push((k, 1)),
            }
        }
        let norm_sq = bigrams.iter().map(|&(_, n)| (n as u64) * (n as u64)).sum();
        Self {
            chars,
            bigrams,
            norm_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Unit-cost insert/delete/substitute edit distance over characters.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_chars(&a, &b)
}

fn edit_distance_chars(a: &[char], b: &[char]) -> usize {
    // bit-parallel for short strings, exact for any length
    levenshtein::distance(a.iter().copied(), b.iter().copied())
}

fn check_nonempty(a: &PreparedText, b: &PreparedText) -> Result<()> {
    if a.is_empty() && b.is_empty() {
        Err(Error::BothEmpty)
    } else {
        Ok(())
    }
}

fn levenshtein_prepared(a: &PreparedText, b: &PreparedText) -> f64 {
    if a.chars == b.chars {
        return 1.0;
    }
    let d = edit_distance_chars(&a.chars, &b.chars);
    let max = a.len().max(b.len());
    1.0 - d as f64 / max as f64
}

fn jaro_prepared(a: &PreparedText, b: &PreparedText) -> f64 {
    let (s, t) = (&a.chars, &b.chars);
    if s == t {
        return 1.0;
    }
    if s.is_empty() || t.is_empty() {
        return 0.0;
    }
    const STACK: usize = 64;
    if s.len() <= STACK && t.len() <= STACK {
        let (mut sm, mut tm) = ([false; STACK], [false; STACK]);
        jaro_chars(s, t, &mut sm[..s.len()], &mut tm[..t.len()])
    } else {
        jaro_chars(s, t, &mut vec![false; s.len()], &mut vec![false; t.len()])
    }
}

/// Jaro of two distinct non-empty strings; the flag slices start all false.
fn jaro_chars(s: &[char], t: &[char], s_matched: &mut [bool], t_matched: &mut [bool]) -> f64 {
    let window = (s.len().max(t.len()) / 2).saturating_sub(1);
    let mut matches = 0usize;
    for (i, &c) in s.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(t.len());
        for j in lo..hi {
            if !t_matched[j] && t[j] == c {
                s_matched[i] = true;
                t_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let mut half_transpositions = 0usize;
    let mut k = 0usize;
    for (i, &c) in s.iter().enumerate() {
        if !s_matched[i] {
            continue;
        }
        while !t_matched[k] {
            k += 1;
        }
        if c != t[k] {
            half_transpositions += 1;
        }
        k += 1;
    }
    jaro_formula(matches, half_transpositions / 2, s.len(), t.len())
}

/// `(m/|a| + m/|b| + (m − t)/m) / 3`
fn jaro_formula(m: usize, t: usize, len_a: usize, len_b: usize) -> f64 {
    let m = m as f64;
    (m / len_a as f64 + m / len_b as f64 + (m - t as f64) / m) / 3.0
}

/// `dot / sqrt(|a|² · |b|²)` from integer counts.
fn cosine_formula(dot: u64, norm_a_sq: u64, norm_b_sq: u64) -> f64 {
    let v = dot as f64 / ((norm_a_sq * norm_b_sq) as f64).sqrt();
    v.min(1.0)
}

fn cosine_prepared(a: &PreparedText, b: &PreparedText) -> f64 {
    if a.chars == b.chars {
        return 1.0;
    }
    if a.norm_sq == 0 || b.norm_sq == 0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0usize, 0usize, 0u64);
    while i < a.bigrams.len() && j < b.bigrams.len() {
        let (ka, na) = a.bigrams[i];
        let (kb, nb) = b.bigrams[j];
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += na as u64 * nb as u64;
                i += 1;
                j += 1;
            }
        }
    }
    cosine_formula(dot, a.norm_sq, b.norm_sq)
}

pub fn levenshtein_sim(a: &str, b: &str) -> Result<f64> {
    let (a, b) = (PreparedText::new(a), PreparedText::new(b));
    check_nonempty(&a, &b)?;
    Ok(levenshtein_prepared(&a, &b))
}

pub fn jaro_sim(a: &str, b: &str) -> Result<f64> {
    let (a, b) = (PreparedText::new(a), PreparedText::new(b));
    check_nonempty(&a, &b)?;
    Ok(jaro_prepared(&a, &b))
}

/// Cosine of character-bigram count vectors (spaces kept). Strings shorter
/// than two characters have no bigrams and score 0 against any different string.
pub fn cosine_sim(a: &str, b: &str) -> Result<f64> {
    let (a, b) = (PreparedText::new(a), PreparedText::new(b));
    check_nonempty(&a, &b)?;
    Ok(cosine_prepared(&a, &b))
}

pub fn fuzzy_score(a: &str, b: &str) -> Result<FuzzyScore> {
    fuzzy_score_prepared(&PreparedText::new(a), &PreparedText::new(b))
}

pub fn fuzzy_score_prepared(a: &PreparedText, b: &PreparedText) -> Result<FuzzyScore> {
    check_nonempty(a, b)?;
    Ok(FuzzyScore::new(
        cosine_prepared(a, b),
        levenshtein_prepared(a, b),
        jaro_prepared(a, b),
    ))
}
