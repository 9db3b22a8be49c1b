//! Core building blocks for multi-domain machine translation benchmarking.
//!
//! The crate is split by concern:
//!
//! * [`corpus`]: parallel test sets, training stores, and the bundled test-set registry.
//! * [`prompting`]: byte-exact prompt rendering and the domain hint catalog.
//! * [`bm25`]: in-memory Okapi BM25 retrieval over a training datastore.
//! * [`dataset`]: fine-tuning data construction (plain and hint-augmented) in Alpaca format.
//! * [`bleu`]: a sacreBLEU-compatible corpus BLEU scorer with the `13a` and `zh` tokenizers.
//! * [`analysis`]: per-domain aggregation, normalization, significance testing and tallies.
//!
//! Everything here is synchronous and free of I/O beyond explicit file loaders.

pub mod analysis;
pub mod bleu;
pub mod bm25;
pub mod corpus;
pub mod dataset;
pub mod prompting;
pub mod rng;

pub use corpus::{LangPair, Language, SegmentPair, TestSet};
