//! Pretrained word vectors in word2vec/fastText text format.
//!
//! ```text
//! <count> <dim>
//! <token> <v1> ... <v_dim>
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::normalize;

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
    zeros: Vec<f64>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadHeader("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            tokens: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
            zeros: vec![0.0; dim],
        })
    }

    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<()> {
        let token = normalize(token);
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                line: self.tokens.len() + 2,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(self.tokens.len() + 2));
        }
        if self.index.contains_key(&token) {
            return Err(Error::DuplicateToken(token));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Stored vector and `true`, or the zero vector and `false`.
    pub fn lookup(&self, token: &str) -> (&[f64], bool) {
        match self.index.get(token) {
            Some(&i) => (self.row(i), true),
            None => (&self.zeros, false),
        }
    }

    /// Mean over in-vocabulary tokens, with the number of tokens found.
    /// Rows are summed in vocabulary order so the result does not depend on
    /// the order of `tokens`.
    pub fn mean_pool_counted<S: AsRef<str>>(&self, tokens: &[S]) -> (Vec<f64>, usize) {
        let mut rows: Vec<usize> = tokens
            .iter()
            .filter_map(|t| self.index.get(t.as_ref()).copied())
            .collect();
        rows.sort_unstable();
        let mut out = vec![0.0; self.dim];
        if rows.is_empty() {
            return (out, 0);
        }
        for &r in &rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        let n = rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        (out, rows.len())
    }

    pub fn mean_pool<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.mean_pool_counted(tokens).0
    }

    /// Writes the text format with 9 significant digits per component.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.tokens.len(), self.dim)?;
        for (i, t) in self.tokens.iter().enumerate() {
            write!(out, "{t}")?;
            for v in self.row(i) {
                write!(out, " {}", round_sig9(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn round_sig9(v: f64) -> f64 {
    format!("{v:.8e}").parse().unwrap_or(v)
}

pub fn load_word_vectors<R: BufRead>(source: R) -> Result<WordVectors> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::BadHeader("missing header".into()))?
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => (
            c.parse::<usize>()
                .map_err(|_| Error::BadHeader(header.clone()))?,
            d.parse::<usize>()
                .map_err(|_| Error::BadHeader(header.clone()))?,
        ),
        _ => return Err(Error::BadHeader(header.clone())),
    };
    let mut wv = WordVectors::new(dim)?;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().unwrap_or_default();
        let values = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
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
        wv.insert(token, &values)?;
    }
    if wv.len() != count {
        return Err(Error::CountMismatch {
            declared: count,
            found: wv.len(),
        });
    }
    Ok(wv)
}
