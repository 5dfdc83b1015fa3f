//! Pretrained vector tables in the plain-text word2vec/GloVe layout.
//!
//! ```text
//! 2 3            <- optional `count dim` header
//! a 1 0 0
//! new york\t0 1 0   <- keys containing spaces end at a TAB
//! ```
//!
//! Files ending in `.gz` are decompressed on the fly.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::nlp::PhraseMatch;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Word,
    Phrase,
    Entity,
}

/// What to return for a key that is not in the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovPolicy {
    Zero,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    kind: EmbeddingKind,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, kind: EmbeddingKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embeddings("dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            kind,
            vectors: HashMap::new(),
        })
    }

    /// Insert or replace a vector. Returns true when the key already existed.
    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::Embeddings(format!(
                "vector for {key:?} has length {}, table dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embeddings(format!("vector for {key:?} has non-finite entries")));
        }
        Ok(self.vectors.insert(key, vector).is_some())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Keys in sorted order.
    pub fn keys(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        keys.sort_unstable();
        keys
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn lookup(&self, key: &str, policy: OovPolicy) -> Result<Vec<f64>> {
        match (self.get(key), policy) {
            (Some(v), _) => Ok(v.to_vec()),
            (None, OovPolicy::Zero) => Ok(vec![0.0; self.dim]),
            (None, OovPolicy::Error) => Err(Error::Embeddings(format!("key {key:?} not in table"))),
        }
    }
}

/// Free-function form of [`EmbeddingTable::lookup`].
pub fn lookup(table: &EmbeddingTable, key: &str, policy: OovPolicy) -> Result<Vec<f64>> {
    table.lookup(key, policy)
}

/// Load a vector file; the dimension is taken from the header or first row.
pub fn load_vectors(path: &Path, kind: EmbeddingKind) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    let read = if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)
    } else {
        std::io::BufReader::new(file).read_to_end(&mut bytes)
    };
    read.map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    parse_vectors(&text, kind).map_err(|e| match e {
        Error::Embeddings(msg) => Error::Embeddings(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_vectors(text: &str, kind: EmbeddingKind) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut duplicates = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 0 {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() == 2 && parts.iter().all(|p| p.parse::<usize>().is_ok()) {
                let dim: usize = parts[1].parse().unwrap_or(0);
                table = Some(EmbeddingTable::new(dim, kind)?);
                continue;
            }
        }
        let (key, rest) = match line.split_once('\t') {
            Some((k, r)) => (k.trim(), r),
            None => line
                .trim_start()
                .split_once(' ')
                .ok_or_else(|| Error::Embeddings(format!("line {}: key without vector", lineno + 1)))?,
        };
        let vector = rest
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::Embeddings(format!("line {}: non-numeric component {v:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let table = match &mut table {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(vector.len(), kind)?),
        };
        if vector.len() != table.dim {
            return Err(Error::Embeddings(format!(
                "line {}: expected {} components, found {}",
                lineno + 1,
                table.dim,
                vector.len()
            )));
        }
        if table
            .insert(key, vector)
            .map_err(|e| Error::Embeddings(format!("line {}: {e}", lineno + 1)))?
        {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate keys in vector file; last occurrence kept");
    }
    table.ok_or_else(|| Error::Embeddings("no vectors in file".into()))
}

/// Exact phrase vector when available, else the mean of the known word
/// vectors of the phrase tokens, else zeros. `dim` comes from the word
/// table, or from the phrase table when no word table is present.
pub fn phrase_vector(
    phrase: &PhraseMatch,
    word_table: Option<&EmbeddingTable>,
    phrase_table: Option<&EmbeddingTable>,
) -> Vec<f64> {
    if let Some(v) = phrase_table.and_then(|t| t.get(&phrase.text)) {
        return v.to_vec();
    }
    let Some(words) = word_table else {
        return vec![0.0; phrase_table.map_or(0, EmbeddingTable::dim)];
    };
    let mut sum = vec![0.0; words.dim()];
    let mut n = 0usize;
    for token in phrase.text.split(' ') {
        if let Some(v) = words.get(token) {
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    sum
}
