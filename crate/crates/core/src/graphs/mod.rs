//! The five view graphs, question incidence matrices, adjacency
//! normalization and on-disk bundles.

mod build;
mod bundle;

pub use build::{
    analyze_questions, build_entity_graph, build_incidence, build_phrase_graph, build_phrase_pos_graph,
    build_view, build_word_graph, build_word_pos_graph, normalize_adjacency, AnalyzedQuestion, ViewResources,
};
pub use bundle::{load_bundle, save_bundle, GraphBundle, QuestionRecord, Split, ViewData};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nn::{SparseMatrix, Tensor};
use crate::{Error, Result};

/// Which graph a node vocabulary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Word,
    WordPos,
    Phrase,
    PhrasePos,
    Entity,
}

impl ViewKind {
    pub const ALL: [ViewKind; 5] = [
        ViewKind::Word,
        ViewKind::WordPos,
        ViewKind::Phrase,
        ViewKind::PhrasePos,
        ViewKind::Entity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Word => "word",
            ViewKind::WordPos => "word_pos",
            ViewKind::Phrase => "phrase",
            ViewKind::PhrasePos => "phrase_pos",
            ViewKind::Entity => "entity",
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ViewKind::ALL
            .into_iter()
            .find(|v| v.as_str() == norm)
            .ok_or_else(|| Error::Graphs(format!("unknown view {s:?}")))
    }
}

/// Nodes, positive weighted edges `(i, j, w)` with `i < j`, and optional
/// node-aligned pretrained vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGraph {
    pub view: ViewKind,
    pub vocab: Vec<String>,
    pub edges: Vec<(usize, usize, f64)>,
    pub pretrained: Option<Tensor>,
}

impl ViewGraph {
    pub fn validate(&self) -> Result<()> {
        let n = self.vocab.len();
        for &(i, j, w) in &self.edges {
            if i == j || i >= n || j >= n {
                return Err(Error::Graphs(format!("{}: bad edge ({i}, {j})", self.view)));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Graphs(format!("{}: edge ({i}, {j}) has weight {w}", self.view)));
            }
        }
        if let Some(p) = &self.pretrained {
            if p.rows() != n {
                return Err(Error::Graphs(format!(
                    "{}: {} pretrained rows for {n} nodes",
                    self.view,
                    p.rows()
                )));
            }
        }
        Ok(())
    }

    pub fn pretrained_dim(&self) -> usize {
        self.pretrained.as_ref().map_or(0, Tensor::cols)
    }
}

/// Question-by-node occurrence matrix with rows normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    pub matrix: SparseMatrix,
}
