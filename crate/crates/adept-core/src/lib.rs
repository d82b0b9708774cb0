//! Engine for agentic, evidence-grounded speech emotion reasoning.
//!
//! The crate implements an end-to-end pipeline: ambiguity-preserving label
//! construction from annotator votes, corpus co-occurrence priors for tool
//! scheduling, deterministic semantic and acoustic probing tools, a
//! three-phase agent protocol with phase-integrity enforcement, a composite
//! trajectory reward with an evidence trust gate and group-relative
//! advantages, and an ambiguity-aware evaluation suite.

pub mod acoustic;
pub mod audio;
pub mod dsp;
pub mod emotion;
pub mod labels;
pub mod manifest;
pub mod prior;

pub use emotion::{canonicalize_emotion, AliasTable, Emotion, ALL_EMOTIONS};
pub use labels::{construct_labels, corpus_stats, ConsensusLevel, LabelSet, VoteRecord};
pub use manifest::{load_manifest, UtteranceRecord, WordSpan};
