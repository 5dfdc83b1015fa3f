use std::collections::HashMap;

use super::{IncidenceMatrix, ViewGraph, ViewKind};
use crate::corpus::Question;
use crate::embeddings::{phrase_vector, EmbeddingTable, OovPolicy};
use crate::nlp::{extract_phrases, match_entities, EntityLexicon, EntityMatch, PatternSet, PhraseMatch, PosTag, Tagger};
use crate::nn::{SparseMatrix, Tensor};
use crate::stats::{cosine, count_cooccurrence, ppmi, Window};
use crate::{par, Error, Result};

/// Per-question NLP output feeding every view.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedQuestion {
    pub tokens: Vec<String>,
    pub tags: Vec<PosTag>,
    pub phrases: Vec<PhraseMatch>,
    pub entities: Vec<EntityMatch>,
}

/// Tag, chunk and entity-match every question.
pub fn analyze_questions(
    questions: &[Question],
    tagger: &dyn Tagger,
    patterns: &PatternSet,
    lexicon: Option<&EntityLexicon>,
) -> Vec<AnalyzedQuestion> {
    par::map_slice(questions, |q| {
        let tagged = tagger.tag(&q.tokens);
        let phrases = extract_phrases(&tagged, patterns);
        let entities = lexicon.map_or_else(Vec::new, |lex| match_entities(&q.clean_text, lex));
        AnalyzedQuestion {
            tokens: q.tokens.clone(),
            tags: tagged.into_iter().map(|t| t.tag).collect(),
            phrases,
            entities,
        }
    })
}

/// External inputs to graph construction.
#[derive(Debug, Clone, Copy)]
pub struct ViewResources<'a> {
    pub word_table: Option<&'a EmbeddingTable>,
    pub phrase_table: Option<&'a EmbeddingTable>,
    pub entity_table: Option<&'a EmbeddingTable>,
    pub word_window: Window,
    pub word_pos_window: Window,
    pub phrase_window: Window,
    pub phrase_pos_window: Window,
}

impl Default for ViewResources<'_> {
    fn default() -> Self {
        ViewResources {
            word_table: None,
            phrase_table: None,
            entity_table: None,
            word_window: Window::Sliding(5),
            word_pos_window: Window::Whole,
            phrase_window: Window::Whole,
            phrase_pos_window: Window::Whole,
        }
    }
}

/// The key sequence a question contributes to a view.
fn view_keys(kind: ViewKind, q: &AnalyzedQuestion) -> Vec<String> {
    match kind {
        ViewKind::Word => q.tokens.clone(),
        ViewKind::WordPos => q.tags.iter().map(|t| t.as_str().to_string()).collect(),
        ViewKind::Phrase => q.phrases.iter().map(|p| p.text.clone()).collect(),
        ViewKind::PhrasePos => q.phrases.iter().map(|p| p.phrase_tag.clone()).collect(),
        ViewKind::Entity => q.entities.iter().map(|e| e.surface.clone()).collect(),
    }
}

struct Indexed {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    sequences: Vec<Vec<usize>>,
}

fn index_sequences(kind: ViewKind, questions: &[AnalyzedQuestion], keep: impl Fn(&str) -> bool) -> Indexed {
    let mut vocab = Vec::new();
    let mut index = HashMap::new();
    let sequences = questions
        .iter()
        .map(|q| {
            view_keys(kind, q)
                .into_iter()
                .filter(|k| keep(k))
                .map(|k| {
                    *index.entry(k.clone()).or_insert_with(|| {
                        vocab.push(k);
                        vocab.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    Indexed {
        vocab,
        index,
        sequences,
    }
}

fn empty_view(kind: ViewKind) -> Error {
    Error::Graphs(format!(
        "the {kind} view has an empty vocabulary for this corpus; disable it in the config"
    ))
}

fn ppmi_view(kind: ViewKind, questions: &[AnalyzedQuestion], window: Window) -> Result<(ViewGraph, Indexed)> {
    let idx = index_sequences(kind, questions, |_| true);
    if idx.vocab.is_empty() {
        return Err(empty_view(kind));
    }
    let counts = count_cooccurrence(&idx.sequences, window)?;
    let edges = ppmi(&counts)?;
    let graph = ViewGraph {
        view: kind,
        vocab: idx.vocab.clone(),
        edges,
        pretrained: None,
    };
    Ok((graph, idx))
}

fn incidence_from(sequences: &[Vec<usize>], n_nodes: usize) -> IncidenceMatrix {
    let mut trips = Vec::new();
    for (q, seq) in sequences.iter().enumerate() {
        if seq.is_empty() {
            continue;
        }
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &k in seq {
            *counts.entry(k).or_default() += 1;
        }
        let total = seq.len() as f64;
        trips.extend(counts.into_iter().map(|(k, c)| (q, k, c as f64 / total)));
    }
    IncidenceMatrix {
        matrix: SparseMatrix::from_triplets(sequences.len(), n_nodes, trips).expect("indices in range"),
    }
}

/// Word nodes, PPMI edges, word vectors (zeros for unknown words) when a table is given.
pub fn build_word_graph(questions: &[AnalyzedQuestion], res: &ViewResources<'_>) -> Result<ViewGraph> {
    let (mut g, _) = ppmi_view(ViewKind::Word, questions, res.word_window)?;
    if let Some(table) = res.word_table {
        let rows = g
            .vocab
            .iter()
            .map(|w| table.lookup(w, OovPolicy::Zero))
            .collect::<Result<Vec<_>>>()?;
        g.pretrained = Some(Tensor::from_rows(&rows)?);
    }
    Ok(g)
}

pub fn build_word_pos_graph(questions: &[AnalyzedQuestion], res: &ViewResources<'_>) -> Result<ViewGraph> {
    Ok(ppmi_view(ViewKind::WordPos, questions, res.word_pos_window)?.0)
}

/// Phrase nodes, PPMI edges over each question's phrase sequence, phrase
/// vectors from the phrase table with word-mean fallback.
pub fn build_phrase_graph(questions: &[AnalyzedQuestion], res: &ViewResources<'_>) -> Result<ViewGraph> {
    let (mut g, idx) = ppmi_view(ViewKind::Phrase, questions, res.phrase_window)?;
    if res.word_table.is_some() || res.phrase_table.is_some() {
        let mut first: Vec<Option<&PhraseMatch>> = vec![None; g.vocab.len()];
        for q in questions {
            for p in &q.phrases {
                let k = idx.index[&p.text];
                first[k].get_or_insert(p);
            }
        }
        let rows: Vec<Vec<f64>> = first
            .iter()
            .map(|p| phrase_vector(p.expect("every phrase node has an occurrence"), res.word_table, res.phrase_table))
            .collect();
        g.pretrained = Some(Tensor::from_rows(&rows)?);
    }
    Ok(g)
}

pub fn build_phrase_pos_graph(questions: &[AnalyzedQuestion], res: &ViewResources<'_>) -> Result<ViewGraph> {
    Ok(ppmi_view(ViewKind::PhrasePos, questions, res.phrase_pos_window)?.0)
}

/// Entity nodes (matched entities with a vector), edges weighted by
/// positive cosine similarity of their vectors.
pub fn build_entity_graph(questions: &[AnalyzedQuestion], table: &EmbeddingTable) -> Result<ViewGraph> {
    let mut missing = std::collections::BTreeSet::new();
    for q in questions {
        for e in &q.entities {
            if table.get(&e.surface).is_none() {
                missing.insert(e.surface.clone());
            }
        }
    }
    if !missing.is_empty() {
        log::warn!(
            "{} matched entities have no vector and are excluded (e.g. {:?})",
            missing.len(),
            missing.iter().next()
        );
    }
    let idx = index_sequences(ViewKind::Entity, questions, |k| table.get(k).is_some());
    if idx.vocab.is_empty() {
        return Err(empty_view(ViewKind::Entity));
    }
    let vectors: Vec<&[f64]> = idx.vocab.iter().map(|k| table.get(k).expect("filtered")).collect();
    let n = vectors.len();
    let per_row = par::map_range(n, |i| {
        let mut row = Vec::new();
        for j in i + 1..n {
            let c = cosine(vectors[i], vectors[j]).expect("equal dims");
            if c > 0.0 {
                row.push((i, j, c));
            }
        }
        row
    });
    Ok(ViewGraph {
        view: ViewKind::Entity,
        pretrained: Some(Tensor::from_rows(&vectors)?),
        vocab: idx.vocab,
        edges: per_row.into_iter().flatten().collect(),
    })
}

/// Occurrence counts of each vocabulary key per question, rows summing to 1.
pub fn build_incidence(questions: &[AnalyzedQuestion], vocab: &[String], kind: ViewKind) -> IncidenceMatrix {
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let sequences: Vec<Vec<usize>> = questions
        .iter()
        .map(|q| view_keys(kind, q).iter().filter_map(|k| index.get(k.as_str()).copied()).collect())
        .collect();
    incidence_from(&sequences, vocab.len())
}

/// Build one view and its incidence matrix.
pub fn build_view(
    kind: ViewKind,
    questions: &[AnalyzedQuestion],
    res: &ViewResources<'_>,
) -> Result<(ViewGraph, IncidenceMatrix)> {
    let graph = match kind {
        ViewKind::Word => build_word_graph(questions, res)?,
        ViewKind::WordPos => build_word_pos_graph(questions, res)?,
        ViewKind::Phrase => build_phrase_graph(questions, res)?,
        ViewKind::PhrasePos => build_phrase_pos_graph(questions, res)?,
        ViewKind::Entity => {
            let table = res
                .entity_table
                .ok_or_else(|| Error::Graphs("the entity view needs an entity vector table".into()))?;
            build_entity_graph(questions, table)?
        }
    };
    graph.validate()?;
    let incidence = build_incidence(questions, &graph.vocab, kind);
    Ok((graph, incidence))
}

/// `D^-1/2 (A + I) D^-1/2` with `A` the symmetric edge matrix.
pub fn normalize_adjacency(graph: &ViewGraph) -> SparseMatrix {
    let n = graph.vocab.len();
    let mut degree = vec![1.0; n];
    for &(i, j, w) in &graph.edges {
        degree[i] += w;
        degree[j] += w;
    }
    let inv: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut trips = Vec::with_capacity(n + 2 * graph.edges.len());
    for (i, d) in inv.iter().enumerate() {
        trips.push((i, i, d * d));
    }
    for &(i, j, w) in &graph.edges {
        let v = w * inv[i] * inv[j];
        trips.push((i, j, v));
        trips.push((j, i, v));
    }
    SparseMatrix::from_triplets(n, n, trips).expect("edge indices validated")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{parse_vectors, EmbeddingKind};
    use crate::nlp::HeuristicTagger;

    fn analyze(texts: &[&str], lexicon: Option<&EntityLexicon>) -> Vec<AnalyzedQuestion> {
        let qs: Vec<Question> = texts.iter().enumerate().map(|(i, t)| Question::new(i, t, Some(0))).collect();
        analyze_questions(&qs, &HeuristicTagger::new(), &PatternSet::default(), lexicon)
    }

    #[test]
    fn word_graph_matches_brute_force() {
        let qs = analyze(&["a b c a", "b c d"], None);
        let res = ViewResources {
            word_window: Window::Whole,
            ..ViewResources::default()
        };
        let g = build_word_graph(&qs, &res).unwrap();
        assert_eq!(g.vocab, vec!["a", "b", "c", "d"]);
        // W = 2; N(a)=1 N(b)=2 N(c)=2 N(d)=1; N(a,b)=N(a,c)=1, N(b,c)=2, N(b,d)=N(c,d)=1
        // PMI(a,b)=ln(1*2/(1*2))=0, PMI(b,c)=ln(2*2/4)=0, PMI(b,d)=0, everything zero
        assert!(g.edges.is_empty());

        let qs = analyze(&["a b", "a b", "c d"], None);
        let g = build_word_graph(&qs, &res).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert!((g.edges[0].2 - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn phrase_views_carry_worked_example() {
        let qs = analyze(&["discuss the main objective of layout design rules"], None);
        let patterns = PatternSet::new([(crate::nlp::PhraseKind::NounPhrase, "(ADJ)(NOUN)")]).unwrap();
        let tagged = HeuristicTagger::new().tag(&qs[0].tokens);
        let mut qs = qs;
        qs[0].phrases = extract_phrases(&tagged, &patterns);
        let res = ViewResources::default();
        let p = build_phrase_graph(&qs, &res).unwrap();
        assert!(p.vocab.contains(&"main objective".to_string()));
        let pp = build_phrase_pos_graph(&qs, &res).unwrap();
        assert!(pp.vocab.contains(&"ADJ_NOUN".to_string()));
    }

    #[test]
    fn phraseless_corpus_fails() {
        let qs = analyze(&["the a an", "of the"], None);
        let err = build_phrase_graph(&qs, &ViewResources::default()).unwrap_err();
        assert!(err.to_string().contains("disable"), "{err}");
    }

    #[test]
    fn entity_edges_are_clamped_cosines() {
        let lex = EntityLexicon::new(["paris", "rome", "oslo", "lima"]);
        let qs = analyze(&["is paris near rome", "oslo or lima"], Some(&lex));
        let table = parse_vectors("paris 1 0\nrome 1 0\noslo 1 1\nlima -1 0\n", EmbeddingKind::Entity).unwrap();
        let g = build_entity_graph(&qs, &table).unwrap();
        assert_eq!(g.vocab, vec!["paris", "rome", "oslo", "lima"]);
        let half = 0.5f64.sqrt();
        let want = [(0, 1, 1.0), (0, 2, half), (1, 2, half)];
        assert_eq!(g.edges.len(), want.len());
        for (got, want) in g.edges.iter().zip(want) {
            assert_eq!((got.0, got.1), (want.0, want.1));
            assert!((got.2 - want.2).abs() < 1e-15);
        }
        assert_eq!(g.pretrained.as_ref().unwrap().rows(), 4);
    }

    #[test]
    fn entities_without_vectors_are_dropped() {
        let lex = EntityLexicon::new(["paris", "atlantis"]);
        let qs = analyze(&["paris or atlantis"], Some(&lex));
        let table = parse_vectors("paris 1 0\n", EmbeddingKind::Entity).unwrap();
        let g = build_entity_graph(&qs, &table).unwrap();
        assert_eq!(g.vocab, vec!["paris"]);
    }

    #[test]
    fn incidence_rows() {
        let qs = analyze(&["a b a", "c", ""], None);
        let vocab: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let inc = build_incidence(&qs, &vocab, ViewKind::Word).matrix;
        assert!((inc.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((inc.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(inc.get(1, 2), 1.0);
        assert_eq!(inc.row(2).count(), 0);
        let ent = build_incidence(&qs, &[], ViewKind::Entity).matrix;
        assert_eq!(ent.nnz(), 0);
    }

    fn graph(n: usize, edges: Vec<(usize, usize, f64)>) -> ViewGraph {
        ViewGraph {
            view: ViewKind::Word,
            vocab: (0..n).map(|i| i.to_string()).collect(),
            edges,
            pretrained: None,
        }
    }

    #[test]
    fn adjacency_normalization() {
        assert_eq!(normalize_adjacency(&graph(1, vec![])).to_dense(), Tensor::identity(1));
        let two = normalize_adjacency(&graph(2, vec![(0, 1, 1.0)])).to_dense();
        assert!(two.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let three = normalize_adjacency(&graph(3, vec![(0, 1, 2.0)]));
        assert_eq!(three.row(2).collect::<Vec<_>>(), vec![(2, 1.0)]);
        assert!(three.is_symmetric(0.0));
    }
}
