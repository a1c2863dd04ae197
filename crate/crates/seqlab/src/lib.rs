//! Statistical sequence labeling for named-entity recognition.
//!
//! The crate covers the full pipeline: reading and validating CoNLL-style
//! BIO corpora ([`corpus`]), inter-annotator agreement ([`agreement`]),
//! feature extraction with optional word clusters ([`features`]), a
//! linear-chain conditional random field with elastic-net training
//! ([`crf`]), and evaluation down to per-entity-type span scores including
//! crosslingual transfer ([`eval`]).
//!
//! Everything that involves randomness takes an explicit seed, and training
//! is deterministic for a fixed seed regardless of thread count.

pub mod agreement;
pub mod corpus;
pub mod crf;
pub mod eval;
pub mod features;
