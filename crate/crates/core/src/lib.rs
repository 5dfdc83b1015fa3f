//! Multi-view graph convolutional question classifier.
//!
//! The pipeline turns a labelled question corpus into five corpus-level
//! graphs (words, word POS tags, phrases, phrase POS tags, named entities),
//! encodes each with a graph convolution, pools the node states into
//! question embeddings, links questions through a cosine-similarity graph
//! rebuilt on every forward pass, and classifies them with a final graph
//! convolution over that question graph.
//!
//! Module map:
//!
//! * [`corpus`] loading, cleaning, label vocabularies and splits
//! * [`nlp`] POS tagging, phrase chunking, entity matching
//! * [`embeddings`] plain-text vector tables
//! * [`stats`] co-occurrence counting, PPMI, cosine
//! * [`graphs`] view graphs, incidence matrices, bundle persistence
//! * [`nn`] tensors, sparse matrices, reverse-mode tape, Adam
//! * [`model`] the classifier, training loop, checkpoints, ablation
//! * [`eval`] macro precision/recall/F1 reports
//! * [`cli`] command-line driver

pub mod cli;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod eval;
pub mod graphs;
pub mod model;
pub mod nlp;
pub mod nn;
pub mod par;
pub mod stats;

pub use error::{Error, Result};
