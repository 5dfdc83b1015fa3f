use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::tagger::{PosTag, TaggedToken};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhraseKind {
    NounPhrase,
    VerbPhrase,
}

impl PhraseKind {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "np" | "noun_phrase" | "noun" => Some(PhraseKind::NounPhrase),
            "vp" | "verb_phrase" | "verb" => Some(PhraseKind::VerbPhrase),
            _ => None,
        }
    }
}

/// A matched phrase inside one question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseMatch {
    pub text: String,
    pub tag_seq: Vec<PosTag>,
    pub phrase_tag: String,
    /// Half-open token span.
    pub span: (usize, usize),
    pub kind: PhraseKind,
}

#[derive(Debug, Clone)]
struct Pattern {
    kind: PhraseKind,
    source: String,
    anchored: Regex,
}

/// Ordered phrase patterns over the single-letter tag alphabet of
/// [`PosTag::code`]. Patterns may also be written with tag names, e.g.
/// `(DET)?(ADJ)*(NOUN|PROPN)+`; names are rewritten to codes before compiling.
#[derive(Debug, Clone)]
pub struct PatternSet {
    patterns: Vec<Pattern>,
}

impl Default for PatternSet {
    fn default() -> Self {
        PatternSet::new([
            (PhraseKind::NounPhrase, "(DET)?(ADJ)*(NOUN|PROPN)+"),
            (PhraseKind::NounPhrase, "(ADJ)(NOUN)"),
            (PhraseKind::VerbPhrase, "(AUX)?(VERB)+(PART|ADP)?"),
        ])
        .expect("default patterns compile")
    }
}

fn rewrite_tag_names(source: &str) -> String {
    let names = Regex::new(r"[A-Z]{2,}").expect("static regex");
    names
        .replace_all(source, |caps: &regex::Captures<'_>| {
            let name = &caps[0];
            PosTag::ALL
                .iter()
                .find(|t| t.as_str() == name)
                .map(|t| t.code().to_string())
                .unwrap_or_else(|| name.to_string())
        })
        .into_owned()
}

impl PatternSet {
    pub fn new<'a, I>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PhraseKind, &'a str)>,
    {
        let mut out = Vec::new();
        for (kind, source) in patterns {
            let coded = rewrite_tag_names(source);
            let anchored = Regex::new(&format!("^(?:{coded})$"))
                .map_err(|e| Error::Nlp(format!("pattern {source:?} does not compile: {e}")))?;
            out.push(Pattern {
                kind,
                source: source.to_string(),
                anchored,
            });
        }
        Ok(PatternSet { patterns: out })
    }

    /// Parse `kind<TAB>regex` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut specs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (kind, regex) = line
                .split_once('\t')
                .ok_or_else(|| Error::Nlp(format!("pattern line {}: expected kind<TAB>regex", lineno + 1)))?;
            let kind = PhraseKind::parse(kind).ok_or_else(|| {
                Error::Nlp(format!("pattern line {}: unknown phrase kind {kind:?}", lineno + 1))
            })?;
            specs.push((kind, regex.trim().to_string()));
        }
        PatternSet::new(specs.iter().map(|(k, s)| (*k, s.as_str())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn sources(&self) -> impl Iterator<Item = (PhraseKind, &str)> {
        self.patterns.iter().map(|p| (p.kind, p.source.as_str()))
    }

    fn matches_kind(&self, kind: PhraseKind, codes: &str) -> bool {
        self.patterns
            .iter()
            .filter(|p| p.kind == kind)
            .any(|p| p.anchored.is_match(codes))
    }

    fn has_kind(&self, kind: PhraseKind) -> bool {
        self.patterns.iter().any(|p| p.kind == kind)
    }
}

/// Leftmost-longest non-overlapping matches for each phrase kind, returned
/// in span order (noun phrases before verb phrases on equal spans).
pub fn extract_phrases(tagged: &[TaggedToken], patterns: &PatternSet) -> Vec<PhraseMatch> {
    let codes: String = tagged.iter().map(|t| t.tag.code()).collect();
    let mut out = Vec::new();
    for kind in [PhraseKind::NounPhrase, PhraseKind::VerbPhrase] {
        if !patterns.has_kind(kind) {
            continue;
        }
        let mut start = 0;
        while start < tagged.len() {
            let end = (start + 1..=tagged.len())
                .rev()
                .find(|&end| patterns.matches_kind(kind, &codes[start..end]));
            match end {
                Some(end) => {
                    let slice = &tagged[start..end];
                    let tag_seq: Vec<PosTag> = slice.iter().map(|t| t.tag).collect();
                    out.push(PhraseMatch {
                        text: slice.iter().map(|t| t.token.as_str()).collect::<Vec<_>>().join(" "),
                        phrase_tag: tag_seq.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("_"),
                        tag_seq,
                        span: (start, end),
                        kind,
                    });
                    start = end;
                }
                None => start += 1,
            }
        }
    }
    out.sort_by_key(|m| (m.span.0, m.kind, m.span.1));
    out
}
