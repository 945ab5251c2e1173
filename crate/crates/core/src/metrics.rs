//! Pairwise classification metrics: accuracy, precision, recall, F1 and ROC AUC.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts over `(predicted, actual)` pairs.
pub fn confusion(decisions: &[(bool, bool)]) -> Result<ConfusionCounts> {
    if decisions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = ConfusionCounts::default();
    for &(pred, actual) in decisions {
        match (pred, actual) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision, recall and F1 are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Harmonic mean of precision and recall; `None` when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

pub fn prf(c: &ConfusionCounts) -> Prf {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => f1_score(p, r),
        _ => None,
    };
    Prf {
        accuracy: ratio(c.tp + c.tn, c.total()).unwrap_or(0.0),
        precision,
        recall,
        f1,
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed exactly from mid-ranks (Mann-Whitney U).
pub fn roc_auc(scored: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scored.iter().filter(|(_, y)| *y).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    // sum of positive ranks, doubled so mid-ranks stay integral
    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].0 == scored[order[i]].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1, mid-rank (i + j + 2) / 2
        let mid_x2 = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| scored[k].1).count() as u128;
        rank_sum_x2 += mid_x2 * pos_in_group;
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * n) as f64)
}

/// Metrics over one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pairs: usize,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: f64,
    /// Share of mentions whose resolved entity (or abstention) matches the labels.
    pub mention_accuracy: Option<f64>,
    pub mentions: usize,
}

impl MetricsReport {
    /// `scored` holds `(score, actual)`; a pair is predicted linked when `score > threshold`.
    pub fn from_scores(scored: &[(f64, bool)], threshold: f64) -> Result<Self> {
        let decisions: Vec<(bool, bool)> = scored.iter().map(|&(s, y)| (s > threshold, y)).collect();
        let counts = confusion(&decisions)?;
        let m = prf(&counts);
        Ok(Self {
            pairs: scored.len(),
            counts,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: roc_auc(scored)?,
            mention_accuracy: None,
            mentions: 0,
        })
    }

    pub fn with_mention_accuracy(mut self, correct: usize, total: usize) -> Self {
        self.mentions = total;
        self.mention_accuracy = (total > 0).then(|| correct as f64 / total as f64);
        self
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        let rows = [
            ("pairs", self.pairs.to_string()),
            ("accuracy", format!("{:.4}", self.accuracy)),
            ("precision", opt(self.precision)),
            ("recall", opt(self.recall)),
            ("f1", opt(self.f1)),
            ("auc", format!("{:.4}", self.auc)),
            ("mention_accuracy", opt(self.mention_accuracy)),
            (
                "tp/fp/tn/fn",
                format!(
                    "{}/{}/{}/{}",
                    self.counts.tp, self.counts.fp, self.counts.tn, self.counts.fn_
                ),
            ),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<18}{v:>12}")?;
        }
        Ok(())
    }
}
