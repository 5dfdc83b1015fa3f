//! Part-of-speech tagging, phrase chunking over tag sequences, and
//! lexicon-based named-entity matching.

mod entities;
mod patterns;
mod tagger;

pub use entities::{match_entities, EntityLexicon, EntityMatch};
pub use patterns::{extract_phrases, PatternSet, PhraseKind, PhraseMatch};
pub use tagger::{tag_tokens, HeuristicTagger, PosTag, PreTaggedTagger, TaggedToken, Tagger};
