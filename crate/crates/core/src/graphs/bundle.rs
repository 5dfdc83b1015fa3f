//! Bundle directory layout:
//!
//! ```text
//! manifest.json          views, sizes, dims, labels, config hash
//! questions.tsv          id<TAB>label-or-"-"<TAB>train|test
//! <view>/nodes.tsv       index<TAB>key
//! <view>/edges.tsv       i<TAB>j<TAB>weight
//! <view>/incidence.tsv   q<TAB>k<TAB>value
//! <view>/pretrained.tsv  index<TAB>v1 ... vd   (only for views with vectors)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IncidenceMatrix, ViewGraph, ViewKind};
use crate::corpus::LabelVocab;
use crate::nn::io::{fmt_real, parse_real};
use crate::nn::{SparseMatrix, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionRecord {
    pub id: usize,
    pub label: Option<usize>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewData {
    pub graph: ViewGraph,
    pub incidence: IncidenceMatrix,
}

/// Every built view plus question metadata; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBundle {
    pub views: Vec<ViewData>,
    pub questions: Vec<QuestionRecord>,
    pub labels: LabelVocab,
    pub config_hash: String,
}

impl GraphBundle {
    pub fn view(&self, kind: ViewKind) -> Option<&ViewData> {
        self.views.iter().find(|v| v.graph.view == kind)
    }

    pub fn num_questions(&self) -> usize {
        self.questions.len()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn train_ids(&self) -> Vec<usize> {
        self.ids_where(Split::Train)
    }

    pub fn test_ids(&self) -> Vec<usize> {
        self.ids_where(Split::Test)
    }

    fn ids_where(&self, split: Split) -> Vec<usize> {
        self.questions.iter().filter(|q| q.split == split).map(|q| q.id).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, q) in self.questions.iter().enumerate() {
            if q.id != i {
                return Err(Error::Graphs(format!("question ids must be 0..n, found {} at {i}", q.id)));
            }
            if q.label.is_some_and(|l| l >= self.labels.len()) {
                return Err(Error::Graphs(format!("question {i} has an out-of-range label")));
            }
        }
        for v in &self.views {
            v.graph.validate()?;
            let shape = v.incidence.matrix.shape();
            if shape != (self.questions.len(), v.graph.vocab.len()) {
                return Err(Error::Graphs(format!(
                    "{}: incidence shape {shape:?} does not match {} questions x {} nodes",
                    v.graph.view,
                    self.questions.len(),
                    v.graph.vocab.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    num_questions: usize,
    labels: Vec<String>,
    views: Vec<ManifestView>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestView {
    view: ViewKind,
    nodes: usize,
    edges: usize,
    incidence_nnz: usize,
    pretrained_dim: usize,
}

fn write(path: PathBuf, text: String) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn read(path: PathBuf) -> Result<(PathBuf, String)> {
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Graphs(format!("cannot read bundle member {}: {e}", path.display())))?;
    Ok((path, text))
}

fn corrupt(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Graphs(format!("corrupt bundle member {} line {line}: {msg}", path.display()))
}

pub fn save_bundle(bundle: &GraphBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        config_hash: bundle.config_hash.clone(),
        num_questions: bundle.questions.len(),
        labels: bundle.labels.names().to_vec(),
        views: bundle
            .views
            .iter()
            .map(|v| ManifestView {
                view: v.graph.view,
                nodes: v.graph.vocab.len(),
                edges: v.graph.edges.len(),
                incidence_nnz: v.incidence.matrix.nnz(),
                pretrained_dim: v.graph.pretrained_dim(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Graphs(e.to_string()))?;
    write(dir.join("manifest.json"), json + "\n")?;

    let mut q = String::new();
    for rec in &bundle.questions {
        let label = rec.label.and_then(|l| bundle.labels.name(l)).unwrap_or("-");
        let split = match rec.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let _ = writeln!(q, "{}\t{label}\t{split}", rec.id);
    }
    write(dir.join("questions.tsv"), q)?;

    for v in &bundle.views {
        let vdir = dir.join(v.graph.view.as_str());
        std::fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        let mut nodes = String::new();
        for (i, k) in v.graph.vocab.iter().enumerate() {
            let _ = writeln!(nodes, "{i}\t{k}");
        }
        write(vdir.join("nodes.tsv"), nodes)?;
        let mut edges = String::new();
        for &(i, j, w) in &v.graph.edges {
            let _ = writeln!(edges, "{i}\t{j}\t{}", fmt_real(w));
        }
        write(vdir.join("edges.tsv"), edges)?;
        let mut inc = String::new();
        for (qi, k, val) in v.incidence.matrix.triplets() {
            let _ = writeln!(inc, "{qi}\t{k}\t{}", fmt_real(val));
        }
        write(vdir.join("incidence.tsv"), inc)?;
        let pre_path = vdir.join("pretrained.tsv");
        match &v.graph.pretrained {
            Some(p) => {
                let mut pre = String::new();
                for r in 0..p.rows() {
                    let _ = write!(pre, "{r}");
                    for &x in p.row(r) {
                        let _ = write!(pre, "\t{}", fmt_real(x));
                    }
                    pre.push('\n');
                }
                write(pre_path, pre)?;
            }
            None if pre_path.exists() => {
                std::fs::remove_file(&pre_path).map_err(|e| Error::io(&pre_path, e))?;
            }
            None => {}
        }
    }
    Ok(())
}

fn fields<'a>(path: &Path, lineno: usize, line: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != n {
        return Err(corrupt(path, lineno, format!("expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

fn parse_usize(path: &Path, lineno: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| corrupt(path, lineno, format!("bad index {s:?}")))
}

fn parse_f64(path: &Path, lineno: usize, s: &str) -> Result<f64> {
    parse_real(s).map_err(|e| corrupt(path, lineno, e))
}

pub fn load_bundle(dir: &Path) -> Result<GraphBundle> {
    let (mpath, mtext) = read(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&mtext).map_err(|e| corrupt(&mpath, e.line(), e))?;
    let labels = LabelVocab::from(manifest.labels.clone());

    let (qpath, qtext) = read(dir.join("questions.tsv"))?;
    let mut questions = Vec::new();
    for (n, line) in qtext.lines().enumerate() {
        let f = fields(&qpath, n + 1, line, 3)?;
        let id = parse_usize(&qpath, n + 1, f[0])?;
        let label = match f[1] {
            "-" => None,
            name => Some(
                labels
                    .get(name)
                    .ok_or_else(|| corrupt(&qpath, n + 1, format!("unknown label {name:?}")))?,
            ),
        };
        let split = match f[2] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(corrupt(&qpath, n + 1, format!("bad split {other:?}"))),
        };
        questions.push(QuestionRecord { id, label, split });
    }
    if questions.len() != manifest.num_questions {
        return Err(corrupt(&qpath, 0, "question count differs from manifest"));
    }

    let mut views = Vec::new();
    for mv in &manifest.views {
        let vdir = dir.join(mv.view.as_str());
        let (npath, ntext) = read(vdir.join("nodes.tsv"))?;
        let mut vocab = Vec::with_capacity(mv.nodes);
        for (n, line) in ntext.lines().enumerate() {
            let (i, key) = line.split_once('\t').ok_or_else(|| corrupt(&npath, n + 1, "expected index<TAB>key"))?;
            if parse_usize(&npath, n + 1, i)? != vocab.len() {
                return Err(corrupt(&npath, n + 1, "node indices must be consecutive"));
            }
            vocab.push(key.to_string());
        }
        let (epath, etext) = read(vdir.join("edges.tsv"))?;
        let mut edges = Vec::with_capacity(mv.edges);
        for (n, line) in etext.lines().enumerate() {
            let f = fields(&epath, n + 1, line, 3)?;
            edges.push((
                parse_usize(&epath, n + 1, f[0])?,
                parse_usize(&epath, n + 1, f[1])?,
                parse_f64(&epath, n + 1, f[2])?,
            ));
        }
        let (ipath, itext) = read(vdir.join("incidence.tsv"))?;
        let mut trips = Vec::with_capacity(mv.incidence_nnz);
        for (n, line) in itext.lines().enumerate() {
            let f = fields(&ipath, n + 1, line, 3)?;
            trips.push((
                parse_usize(&ipath, n + 1, f[0])?,
                parse_usize(&ipath, n + 1, f[1])?,
                parse_f64(&ipath, n + 1, f[2])?,
            ));
        }
        let matrix = SparseMatrix::from_triplets(questions.len(), vocab.len(), trips)
            .map_err(|e| corrupt(&ipath, 0, e))?;
        let pretrained = if mv.pretrained_dim > 0 {
            let (ppath, ptext) = read(vdir.join("pretrained.tsv"))?;
            let mut rows = Vec::with_capacity(vocab.len());
            for (n, line) in ptext.lines().enumerate() {
                let f = fields(&ppath, n + 1, line, mv.pretrained_dim + 1)?;
                let row = f[1..]
                    .iter()
                    .map(|s| parse_f64(&ppath, n + 1, s))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(row);
            }
            Some(Tensor::from_rows(&rows).map_err(|e| corrupt(&ppath, 0, e))?)
        } else {
            None
        };
        let graph = ViewGraph {
            view: mv.view,
            vocab,
            edges,
            pretrained,
        };
        if graph.vocab.len() != mv.nodes || graph.edges.len() != mv.edges {
            return Err(corrupt(&npath, 0, "node or edge count differs from manifest"));
        }
        views.push(ViewData {
            graph,
            incidence: IncidenceMatrix { matrix },
        });
    }
    let bundle = GraphBundle {
        views,
        questions,
        labels,
        config_hash: manifest.config_hash,
    };
    bundle.validate()?;
    Ok(bundle)
}
