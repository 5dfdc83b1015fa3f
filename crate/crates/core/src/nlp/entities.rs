use std::collections::HashSet;
use std::path::Path;

use crate::corpus::clean_text;
use crate::{Error, Result};

/// Entity surface forms, cleaned with the corpus rules.
#[derive(Debug, Clone, Default)]
pub struct EntityLexicon {
    surfaces: HashSet<String>,
    max_tokens: usize,
}

impl EntityLexicon {
    pub fn new<I, S>(surfaces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = EntityLexicon::default();
        for s in surfaces {
            let clean = clean_text(s.as_ref());
            if clean.is_empty() {
                continue;
            }
            lex.max_tokens = lex.max_tokens.max(clean.split(' ').count());
            lex.surfaces.insert(clean);
        }
        lex
    }

    /// One surface form per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.surfaces.contains(surface)
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMatch {
    pub surface: String,
    /// Half-open token span.
    pub span: (usize, usize),
}

/// Greedy longest-first n-gram matching, left to right, non-overlapping.
pub fn match_entities(clean_text: &str, lexicon: &EntityLexicon) -> Vec<EntityMatch> {
    let tokens: Vec<&str> = clean_text.split_whitespace().collect();
    let mut out = Vec::new();
    if lexicon.is_empty() {
        return out;
    }
    let mut start = 0;
    while start < tokens.len() {
        let longest = (1..=lexicon.max_tokens.min(tokens.len() - start))
            .rev()
            .map(|n| (n, tokens[start..start + n].join(" ")))
            .find(|(_, s)| lexicon.contains(s));
        match longest {
            Some((n, surface)) => {
                out.push(EntityMatch {
                    surface,
                    span: (start, start + n),
                });
                start += n;
            }
            None => start += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins() {
        let lex = EntityLexicon::new(["New York", "new york city"]);
        let m = match_entities("where is new york city", &lex);
        assert_eq!(
            m,
            vec![EntityMatch {
                surface: "new york city".into(),
                span: (2, 5)
            }]
        );
    }

    #[test]
    fn empty_lexicon() {
        assert!(match_entities("where is paris", &EntityLexicon::default()).is_empty());
    }

    #[test]
    fn french_revolution() {
        let lex = EntityLexicon::new(["French Revolution"]);
        let m = match_entities("what are the causes of the french revolution", &lex);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].span, (6, 8));
    }

    #[test]
    fn rerun_on_matches_is_stable() {
        let lex = EntityLexicon::new(["paris", "france", "eiffel tower"]);
        let text = "is the eiffel tower in paris france";
        let m = match_entities(text, &lex);
        assert_eq!(m.len(), 3);
        let toks: Vec<&str> = text.split(' ').collect();
        for e in &m {
            let again = match_entities(&toks[e.span.0..e.span.1].join(" "), &lex);
            assert_eq!(again.len(), 1);
            assert_eq!(again[0].surface, e.surface);
        }
        for w in m.windows(2) {
            assert!(w[0].span.1 <= w[1].span.0);
        }
    }
}
