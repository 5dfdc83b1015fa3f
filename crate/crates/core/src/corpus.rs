//! Question corpora: loading, text cleaning, label vocabularies, splits.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One question record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: usize,
    pub raw_text: String,
    pub clean_text: String,
    pub tokens: Vec<String>,
    pub label: Option<usize>,
}

impl Question {
    pub fn new(id: usize, raw_text: &str, label: Option<usize>) -> Self {
        let clean = clean_text(raw_text);
        let tokens = tokenize(&clean);
        Question {
            id,
            raw_text: raw_text.to_string(),
            clean_text: clean,
            tokens,
            label,
        }
    }
}

/// Ordered label names with a reverse index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelVocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for LabelVocab {
    fn from(names: Vec<String>) -> Self {
        let mut vocab = LabelVocab::default();
        for name in names {
            vocab.intern(&name);
        }
        vocab
    }
}

impl From<LabelVocab> for Vec<String> {
    fn from(vocab: LabelVocab) -> Self {
        vocab.names
    }
}

impl LabelVocab {
    /// Index of `name`, inserting it at the end if new.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Row layout of a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// `label<TAB>question`
    Tsv,
    /// `COARSE:fine question`, labelled with the coarse class.
    TrecCoarse,
    /// `COARSE:fine question`, labelled with the full `COARSE:fine` token.
    TrecFine,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "trec" | "trec-coarse" => Ok(CorpusFormat::TrecCoarse),
            "trec-fine" => Ok(CorpusFormat::TrecFine),
            other => Err(Error::Corpus(format!("unknown corpus format {other:?}"))),
        }
    }
}

/// Load a corpus file into questions numbered from 0 with a fresh label vocabulary.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<(Vec<Question>, LabelVocab)> {
    let mut labels = LabelVocab::default();
    let questions = load_corpus_into(path, format, &mut labels, 0)?;
    Ok((questions, labels))
}

/// Load a corpus file, extending `labels` and numbering questions from `first_id`.
pub fn load_corpus_into(
    path: &Path,
    format: CorpusFormat,
    labels: &mut LabelVocab,
    first_id: usize,
) -> Result<Vec<Question>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // TREC distributions are latin-1; anything outside ASCII is dropped by cleaning anyway.
    let text = String::from_utf8_lossy(&bytes);
    let questions = parse_corpus(&text, format, labels, first_id)
        .map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))?;
    Ok(questions)
}

/// Parse corpus text. Errors are plain messages; the caller adds the path.
pub fn parse_corpus(
    text: &str,
    format: CorpusFormat,
    labels: &mut LabelVocab,
    first_id: usize,
) -> std::result::Result<Vec<Question>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = match format {
            CorpusFormat::Tsv => line
                .split_once('\t')
                .map(|(l, b)| (l.trim().to_string(), b))
                .ok_or_else(|| format!("line {}: expected `label<TAB>text`", lineno + 1))?,
            CorpusFormat::TrecCoarse | CorpusFormat::TrecFine => {
                let line = line.trim_start();
                let (head, body) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
                let (coarse, _fine) = head
                    .split_once(':')
                    .ok_or_else(|| format!("line {}: expected `COARSE:fine text`", lineno + 1))?;
                let label = if format == CorpusFormat::TrecCoarse {
                    coarse
                } else {
                    head
                };
                (label.to_string(), body)
            }
        };
        if label.is_empty() {
            return Err(format!("line {}: empty label", lineno + 1));
        }
        let label = labels.intern(&label);
        out.push(Question::new(first_id + out.len(), body, Some(label)));
    }
    if out.is_empty() {
        return Err("empty corpus".to_string());
    }
    Ok(out)
}

const INTERROGATIVE_HEADS: &[&str] = &[
    "what", "who", "where", "when", "why", "how", "which", "that", "there", "here", "it", "he",
    "she", "this",
];

const CLITICS: &[&str] = &["'s", "n't", "'re", "'ll", "'ve", "'m", "'d"];

fn expand_contraction(word: &str, out: &mut String) {
    let push = |out: &mut String, s: &str| {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(s);
    };
    match word {
        "won't" => return push(out, "will not"),
        "can't" => return push(out, "can not"),
        "shan't" => return push(out, "shall not"),
        "ain't" => return push(out, "is not"),
        _ => {}
    }
    if let Some(stem) = word.strip_suffix("n't") {
        push(out, stem);
        return push(out, "not");
    }
    for (suffix, full) in [("'re", "are"), ("'ll", "will"), ("'ve", "have"), ("'m", "am"), ("'d", "would")] {
        if let Some(stem) = word.strip_suffix(suffix) {
            push(out, stem);
            return push(out, full);
        }
    }
    if let Some(stem) = word.strip_suffix("'s") {
        push(out, stem);
        if INTERROGATIVE_HEADS.contains(&stem) {
            push(out, "is");
        }
        return;
    }
    push(out, word);
}

/// Lowercase, expand contractions, keep `[a-z0-9 ]`, collapse whitespace.
pub fn clean_text(raw: &str) -> String {
    let lowered = raw.to_lowercase().replace(['\u{2019}', '\u{2018}', '`'], "'");
    // Re-attach clitics that pre-tokenized corpora split off ("what 's").
    let mut words: Vec<String> = Vec::new();
    for w in lowered.split_whitespace() {
        match words.last_mut() {
            Some(prev) if CLITICS.contains(&w) => prev.push_str(w),
            _ => words.push(w.to_string()),
        }
    }
    let mut expanded = String::with_capacity(lowered.len());
    for w in &words {
        let w = w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\''));
        expand_contraction(w, &mut expanded);
    }
    let kept: String = expanded
        .chars()
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c.is_whitespace())
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace split of cleaned text.
pub fn tokenize(clean: &str) -> Vec<String> {
    clean.split_whitespace().map(str::to_string).collect()
}

/// Disjoint train/test id sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Build from explicit sets (e.g. a fixed test file). Ids are sorted.
    pub fn from_sets(mut train_ids: Vec<usize>, mut test_ids: Vec<usize>, seed: u64) -> Result<Self> {
        train_ids.sort_unstable();
        test_ids.sort_unstable();
        let train: BTreeSet<_> = train_ids.iter().collect();
        if test_ids.iter().any(|id| train.contains(id)) {
            return Err(Error::Corpus("train and test ids overlap".into()));
        }
        Ok(DatasetSplit {
            train_ids,
            test_ids,
            seed,
        })
    }

    pub fn is_train(&self, id: usize) -> bool {
        self.train_ids.binary_search(&id).is_ok()
    }

    /// `id<TAB>{train|test}` rows in id order.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(usize, &str)> = self
            .train_ids
            .iter()
            .map(|&i| (i, "train"))
            .chain(self.test_ids.iter().map(|&i| (i, "test")))
            .collect();
        rows.sort_unstable();
        let mut out = String::new();
        for (id, side) in rows {
            let _ = writeln!(out, "{id}\t{side}");
        }
        out
    }
}

/// Seeded shuffle; the first `floor((1 - f) * n)` ids train, the rest test.
pub fn split_corpus(questions: &[Question], test_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Corpus(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if questions.len() < 2 {
        return Err(Error::Corpus("need at least two questions to split".into()));
    }
    let n = questions.len();
    let mut ids: Vec<usize> = questions.iter().map(|q| q.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (((1.0 - test_fraction) * n as f64).floor() as usize).clamp(1, n - 1);
    let test = ids.split_off(n_train);
    DatasetSplit::from_sets(ids, test, seed)
}

/// Labels present in the corpus but absent from the training ids.
pub fn missing_train_classes(questions: &[Question], split: &DatasetSplit, num_classes: usize) -> Vec<usize> {
    let mut seen = vec![false; num_classes];
    for q in questions {
        if let Some(l) = q.label {
            if split.is_train(q.id) && l < num_classes {
                seen[l] = true;
            }
        }
    }
    (0..num_classes).filter(|&c| !seen[c]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize) -> Vec<Question> {
        (0..n).map(|i| Question::new(i, &format!("question {i}"), Some(i % 2))).collect()
    }

    #[test]
    fn cleaning_examples() {
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("Don't PANIC!!"), "do not panic");
        assert_eq!(
            clean_text("What is the role of the cell?"),
            "what is the role of the cell"
        );
        assert_eq!(clean_text("What's a marsupial?"), "what is a marsupial");
        assert_eq!(clean_text("What 's the  capital of Chad ?"), "what is the capital of chad");
        assert_eq!(clean_text("They're here, we'll go"), "they are here we will go");
        assert_eq!(clean_text("I can't, I won't"), "i can not i will not");
        assert_eq!(clean_text("Lincoln's hat"), "lincoln hat");
        assert_eq!(clean_text("In 1969 , who ?"), "in 1969 who");
    }

    #[test]
    fn trec_rows() {
        let text = "LOC:city Where is Berlin ?\nENTY:animal What's a marsupial?\n";
        let mut labels = LabelVocab::default();
        let qs = parse_corpus(text, CorpusFormat::TrecCoarse, &mut labels, 0).unwrap();
        assert_eq!(labels.names(), &["LOC".to_string(), "ENTY".to_string()]);
        assert_eq!(qs[0].clean_text, "where is berlin");
        assert_eq!(qs[0].label, Some(0));
        assert_eq!(qs[1].clean_text, "what is a marsupial");

        let mut fine = LabelVocab::default();
        parse_corpus(text, CorpusFormat::TrecFine, &mut fine, 0).unwrap();
        assert_eq!(fine.names(), &["LOC:city".to_string(), "ENTY:animal".to_string()]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let mut labels = LabelVocab::default();
        let err = parse_corpus("a\tok\nno tab here\n", CorpusFormat::Tsv, &mut labels, 0).unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_corpus("LOC:x fine\nnocolon text\n", CorpusFormat::TrecCoarse, &mut labels, 0)
            .unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_corpus("\n\n", CorpusFormat::Tsv, &mut labels, 0).is_err());
    }

    #[test]
    fn empty_clean_text_is_kept() {
        let mut labels = LabelVocab::default();
        let qs = parse_corpus("x\t?!\n", CorpusFormat::Tsv, &mut labels, 0).unwrap();
        assert_eq!(qs.len(), 1);
        assert!(qs[0].tokens.is_empty());
    }

    #[test]
    fn split_rules() {
        let qs = toy(10);
        let a = split_corpus(&qs, 0.3, 7).unwrap();
        let b = split_corpus(&qs, 0.3, 7).unwrap();
        assert_eq!(a, b);
        assert!(split_corpus(&qs, 0.0, 7).is_err());
        assert!(split_corpus(&qs, 1.0, 7).is_err());

        let s = split_corpus(&toy(596), 0.3, 1).unwrap();
        assert_eq!((s.train_ids.len(), s.test_ids.len()), (417, 179));
    }

    #[test]
    fn split_tsv_lists_every_id() {
        let s = split_corpus(&toy(5), 0.4, 3).unwrap();
        let tsv = s.to_tsv();
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.starts_with("0\t"));
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(s in "\\PC{0,60}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert_eq!(tokenize(&once).join(" "), once.clone());
            prop_assert!(once.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == ' '));
        }

        #[test]
        fn splits_partition_ids(n in 2usize..80, f in 0.05f64..0.95, seed in any::<u64>()) {
            let qs = toy(n);
            let s = split_corpus(&qs, f, seed).unwrap();
            prop_assert_eq!(s.train_ids.len() + s.test_ids.len(), n);
            let mut all: Vec<_> = s.train_ids.iter().chain(&s.test_ids).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
