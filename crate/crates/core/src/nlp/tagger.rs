use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::clean_text;
use crate::{Error, Result};

/// Universal POS tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Adj,
    Adp,
    Adv,
    Aux,
    Conj,
    Det,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Verb,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 13] = [
        PosTag::Adj,
        PosTag::Adp,
        PosTag::Adv,
        PosTag::Aux,
        PosTag::Conj,
        PosTag::Det,
        PosTag::Noun,
        PosTag::Num,
        PosTag::Part,
        PosTag::Pron,
        PosTag::Propn,
        PosTag::Verb,
        PosTag::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Adj => "ADJ",
            PosTag::Adp => "ADP",
            PosTag::Adv => "ADV",
            PosTag::Aux => "AUX",
            PosTag::Conj => "CONJ",
            PosTag::Det => "DET",
            PosTag::Noun => "NOUN",
            PosTag::Num => "NUM",
            PosTag::Part => "PART",
            PosTag::Pron => "PRON",
            PosTag::Propn => "PROPN",
            PosTag::Verb => "VERB",
            PosTag::X => "X",
        }
    }

    /// Single-letter code used when matching phrase patterns.
    ///
    /// | tag | code | tag | code | tag | code |
    /// |-----|------|-----|------|-----|------|
    /// | ADJ | J | DET | D | PRON | O |
    /// | ADP | I | NOUN | N | PROPN | P |
    /// | ADV | R | NUM | M | VERB | V |
    /// | AUX | A | PART | T | X | X |
    /// | CONJ | C | | | | |
    pub fn code(self) -> char {
        match self {
            PosTag::Adj => 'J',
            PosTag::Adp => 'I',
            PosTag::Adv => 'R',
            PosTag::Aux => 'A',
            PosTag::Conj => 'C',
            PosTag::Det => 'D',
            PosTag::Noun => 'N',
            PosTag::Num => 'M',
            PosTag::Part => 'T',
            PosTag::Pron => 'O',
            PosTag::Propn => 'P',
            PosTag::Verb => 'V',
            PosTag::X => 'X',
        }
    }

    /// Map a Penn Treebank tag onto the universal set.
    pub fn from_penn(tag: &str) -> Option<PosTag> {
        let t = match tag {
            "JJ" | "JJR" | "JJS" => PosTag::Adj,
            "IN" => PosTag::Adp,
            "RB" | "RBR" | "RBS" | "WRB" => PosTag::Adv,
            "MD" => PosTag::Aux,
            "CC" => PosTag::Conj,
            "DT" | "PDT" | "WDT" => PosTag::Det,
            "NN" | "NNS" => PosTag::Noun,
            "CD" => PosTag::Num,
            "RP" | "TO" | "POS" => PosTag::Part,
            "PRP" | "PRP$" | "WP" | "WP$" | "EX" => PosTag::Pron,
            "NNP" | "NNPS" => PosTag::Propn,
            "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" => PosTag::Verb,
            "FW" | "SYM" | "UH" | "LS" => PosTag::X,
            _ => return None,
        };
        Some(t)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        if let Some(t) = PosTag::ALL.iter().find(|t| t.as_str() == upper) {
            return Ok(*t);
        }
        match upper.as_str() {
            "CCONJ" | "SCONJ" => Ok(PosTag::Conj),
            "PUNCT" | "SYM" | "INTJ" => Ok(PosTag::X),
            _ => PosTag::from_penn(&upper)
                .ok_or_else(|| Error::Nlp(format!("unknown POS tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub token: String,
    pub tag: PosTag,
}

/// Assigns one tag per token.
pub trait Tagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Vec<TaggedToken>;
}

pub fn tag_tokens(tokens: &[String], tagger: &dyn Tagger) -> Vec<TaggedToken> {
    tagger.tag(tokens)
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "some", "any", "no",
    "all", "both", "either", "neither", "another", "such", "what", "which", "whose", "whatever",
];
const PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours",
    "they", "them", "their", "theirs", "themselves", "who", "whom", "someone", "somebody",
    "anyone", "anybody", "everyone", "everything", "something", "anything", "nothing", "one",
    "there",
];
const ADPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "from", "to", "into", "onto", "about", "above",
    "below", "over", "under", "between", "among", "through", "during", "before", "after",
    "across", "against", "along", "around", "behind", "beside", "besides", "beyond", "near",
    "inside", "outside", "within", "without", "toward", "towards", "upon", "via", "per", "like",
    "than", "since", "until", "despite", "throughout", "off", "as",
];
const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "yet", "so", "if", "because", "although", "though", "while",
    "whereas", "unless", "whether",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has",
    "had", "having", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
];
const PARTICLES: &[&str] = &["not", "up", "out", "down"];
const ADVERBS: &[&str] = &[
    "how", "when", "where", "why", "very", "also", "just", "only", "too", "most", "more",
    "less", "least", "often", "never", "always", "ever", "still", "then", "now", "here", "again",
    "once", "already", "soon", "far", "well", "much", "away", "together", "else",
    "long", "ago", "almost", "however", "usually", "mostly",
];
const NUMBER_WORDS: &[&str] = &[
    "zero", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    "hundred", "thousand", "million", "billion", "trillion", "dozen",
];

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");

/// Closed-class word lists, a shipped open-class lexicon, then suffix rules,
/// then NOUN.
#[derive(Debug, Clone)]
pub struct HeuristicTagger {
    lexicon: HashMap<String, PosTag>,
}

impl Default for HeuristicTagger {
    fn default() -> Self {
        Self::new()
    }
}

impl HeuristicTagger {
    pub fn new() -> Self {
        let mut lexicon = HashMap::new();
        for line in DEFAULT_LEXICON.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((word, tag)) = line.split_once('\t') {
                if let Ok(tag) = tag.trim().parse() {
                    lexicon.insert(word.trim().to_string(), tag);
                }
            }
        }
        // Closed classes override the open-class file.
        let closed: [(&[&str], PosTag); 8] = [
            (NUMBER_WORDS, PosTag::Num),
            (ADVERBS, PosTag::Adv),
            (PARTICLES, PosTag::Part),
            (CONJUNCTIONS, PosTag::Conj),
            (ADPOSITIONS, PosTag::Adp),
            (PRONOUNS, PosTag::Pron),
            (DETERMINERS, PosTag::Det),
            (AUXILIARIES, PosTag::Aux),
        ];
        for (words, tag) in closed {
            for w in words {
                lexicon.insert((*w).to_string(), tag);
            }
        }
        HeuristicTagger { lexicon }
    }

    /// Add or override lexicon entries.
    pub fn with_entries<I, S>(mut self, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, PosTag)>,
        S: Into<String>,
    {
        for (w, t) in entries {
            self.lexicon.insert(w.into(), t);
        }
        self
    }

    fn tag_word(&self, word: &str) -> PosTag {
        if let Some(&t) = self.lexicon.get(word) {
            return t;
        }
        if word.chars().any(|c| c.is_ascii_digit()) {
            return PosTag::Num;
        }
        suffix_tag(word).unwrap_or(PosTag::Noun)
    }
}

fn suffix_tag(word: &str) -> Option<PosTag> {
    let n = word.len();
    let ends = |s: &str| word.ends_with(s) && n > s.len() + 2;
    if ends("ing") || ends("ed") || ends("ize") || ends("ise") || ends("ify") {
        return Some(PosTag::Verb);
    }
    if ends("ly") {
        return Some(PosTag::Adv);
    }
    const NOUN_SUFFIXES: &[&str] = &[
        "tion", "sion", "ness", "ment", "ity", "ism", "ist", "ship", "ance", "ence", "hood",
        "dom", "er", "or", "ogy",
    ];
    if NOUN_SUFFIXES.iter().any(|s| ends(s)) {
        return Some(PosTag::Noun);
    }
    const ADJ_SUFFIXES: &[&str] = &[
        "ous", "ful", "ive", "able", "ible", "ical", "ial", "al", "ic", "less", "ary", "ish",
        "est",
    ];
    if ADJ_SUFFIXES.iter().any(|s| ends(s)) {
        return Some(PosTag::Adj);
    }
    None
}

impl Tagger for HeuristicTagger {
    fn tag(&self, tokens: &[String]) -> Vec<TaggedToken> {
        let mut tags: Vec<PosTag> = tokens.iter().map(|t| self.tag_word(t)).collect();
        // "to" before a verb is the infinitive marker.
        for i in 0..tags.len().saturating_sub(1) {
            if tokens[i] == "to" && tags[i + 1] == PosTag::Verb {
                tags[i] = PosTag::Part;
            }
        }
        tokens
            .iter()
            .zip(tags)
            .map(|(token, tag)| TaggedToken {
                token: token.clone(),
                tag,
            })
            .collect()
    }
}

/// Serves tags from a file of externally tagged questions (`token/TAG`
/// whitespace-separated, one question per line). Token sequences not in the
/// file fall back to the heuristic tagger.
#[derive(Debug, Clone)]
pub struct PreTaggedTagger {
    sentences: HashMap<String, Vec<PosTag>>,
    fallback: HeuristicTagger,
}

impl PreTaggedTagger {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Nlp(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut sentences = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut words = Vec::new();
            let mut tags = Vec::new();
            for item in line.split_whitespace() {
                let (word, tag) = item
                    .rsplit_once('/')
                    .ok_or_else(|| format!("line {}: expected token/TAG, got {item:?}", lineno + 1))?;
                let tag: PosTag = tag
                    .parse()
                    .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                // Keep alignment with cleaned tokens: a token may clean to zero or several words.
                for w in clean_text(word).split_whitespace() {
                    words.push(w.to_string());
                    tags.push(tag);
                }
            }
            sentences.insert(words.join(" "), tags);
        }
        Ok(PreTaggedTagger {
            sentences,
            fallback: HeuristicTagger::new(),
        })
    }
}

impl Tagger for PreTaggedTagger {
    fn tag(&self, tokens: &[String]) -> Vec<TaggedToken> {
        match self.sentences.get(&tokens.join(" ")) {
            Some(tags) if tags.len() == tokens.len() => tokens
                .iter()
                .zip(tags)
                .map(|(token, &tag)| TaggedToken {
                    token: token.clone(),
                    tag,
                })
                .collect(),
            _ => self.fallback.tag(tokens),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn tags(s: &str) -> Vec<PosTag> {
        HeuristicTagger::new().tag(&toks(s)).into_iter().map(|t| t.tag).collect()
    }

    #[test]
    fn examples() {
        assert!(HeuristicTagger::new().tag(&[]).is_empty());
        assert_eq!(tags("main objective"), vec![PosTag::Adj, PosTag::Noun]);
        assert_eq!(tags("running"), vec![PosTag::Verb]);
        assert_eq!(
            tags("discuss the main objective of layout design rules"),
            vec![
                PosTag::Verb,
                PosTag::Det,
                PosTag::Adj,
                PosTag::Noun,
                PosTag::Adp,
                PosTag::Noun,
                PosTag::Noun,
                PosTag::Noun
            ]
        );
        assert_eq!(tags("zxqv"), vec![PosTag::Noun]);
        assert_eq!(tags("1969"), vec![PosTag::Num]);
        assert_eq!(tags("quickly"), vec![PosTag::Adv]);
        assert_eq!(tags("steps to solve")[1], PosTag::Part);
    }

    #[test]
    fn tag_parsing() {
        assert_eq!("noun".parse::<PosTag>().unwrap(), PosTag::Noun);
        assert_eq!("NNS".parse::<PosTag>().unwrap(), PosTag::Noun);
        assert_eq!("CCONJ".parse::<PosTag>().unwrap(), PosTag::Conj);
        assert!("BOGUS".parse::<PosTag>().is_err());
        let codes: std::collections::HashSet<char> = PosTag::ALL.iter().map(|t| t.code()).collect();
        assert_eq!(codes.len(), PosTag::ALL.len());
    }

    #[test]
    fn pretagged_reader() {
        let tagger = PreTaggedTagger::parse("Where/ADV is/AUX Berlin/PROPN ?/PUNCT\n").unwrap();
        let out = tagger.tag(&toks("where is berlin"));
        assert_eq!(out[2].tag, PosTag::Propn);
        // unseen sentence falls back
        assert_eq!(tagger.tag(&toks("running"))[0].tag, PosTag::Verb);
        assert!(PreTaggedTagger::parse("word-without-tag\n").is_err());
    }

    proptest! {
        #[test]
        fn one_tag_per_token(words in proptest::collection::vec("[a-z0-9]{1,10}", 0..20)) {
            let out = HeuristicTagger::new().tag(&words);
            prop_assert_eq!(out.len(), words.len());
            for (t, w) in out.iter().zip(&words) {
                prop_assert_eq!(&t.token, w);
                prop_assert!(PosTag::ALL.contains(&t.tag));
            }
        }
    }
}
