//! The closed 8-way emotion label space and string canonicalization.
//!
//! Every label stored anywhere in the engine is a member of this set.
//! Free-form strings coming from manifests or policy outputs must pass
//! through [`canonicalize_emotion`]; unknown strings (including `"Other"`)
//! are rejected rather than silently mapped, because an invalid label is a
//! format-gate failure downstream in the reward engine.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The canonical emotion categories, with stable indices 0–7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Emotion {
    Anger,
    Sadness,
    Happiness,
    Surprise,
    Fear,
    Disgust,
    Contempt,
    Neutral,
}

/// All eight members in index order.
pub const ALL_EMOTIONS: [Emotion; 8] = [
    Emotion::Anger,
    Emotion::Sadness,
    Emotion::Happiness,
    Emotion::Surprise,
    Emotion::Fear,
    Emotion::Disgust,
    Emotion::Contempt,
    Emotion::Neutral,
];

impl Emotion {
    /// Stable integer index in 0..8.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`Emotion::index`].
    pub fn from_index(idx: usize) -> Option<Emotion> {
        ALL_EMOTIONS.get(idx).copied()
    }

    /// Canonical display name.
    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "Anger",
            Emotion::Sadness => "Sadness",
            Emotion::Happiness => "Happiness",
            Emotion::Surprise => "Surprise",
            Emotion::Fear => "Fear",
            Emotion::Disgust => "Disgust",
            Emotion::Contempt => "Contempt",
            Emotion::Neutral => "Neutral",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raised when a raw label string does not canonicalize.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown emotion label: {raw:?}")]
pub struct UnknownLabel {
    /// The offending raw string, trimmed.
    pub raw: String,
}

/// Alias table mapping normalized alternate spellings to canonical members.
///
/// The table is explicit configuration: it ships with a minimal default and
/// callers may extend it. Keys are stored lowercase/trimmed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AliasTable {
    aliases: BTreeMap<String, Emotion>,
}

impl AliasTable {
    /// Empty table (canonical names only).
    pub fn empty() -> Self {
        Self { aliases: BTreeMap::new() }
    }

    /// Add one alias; the key is normalized before insertion.
    pub fn insert(&mut self, alias: &str, emotion: Emotion) {
        self.aliases.insert(normalize_key(alias), emotion);
    }

    fn lookup(&self, key: &str) -> Option<Emotion> {
        self.aliases.get(key).copied()
    }
}

impl Default for AliasTable {
    fn default() -> Self {
        let mut t = Self::empty();
        t.insert("happy", Emotion::Happiness);
        t.insert("sad", Emotion::Sadness);
        t.insert("angry", Emotion::Anger);
        t.insert("neutral", Emotion::Neutral);
        t.insert("surprised", Emotion::Surprise);
        t.insert("fearful", Emotion::Fear);
        t.insert("disgusted", Emotion::Disgust);
        t
    }
}

fn normalize_key(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Map a raw string to its canonical member: trimmed, case-folded, then
/// alias-mapped. `"Other"` and anything else outside the closed set fail
/// with [`UnknownLabel`].
pub fn canonicalize_emotion(raw: &str, aliases: &AliasTable) -> Result<Emotion, UnknownLabel> {
    let key = normalize_key(raw);
    for e in ALL_EMOTIONS {
        if key == e.name().to_lowercase() {
            return Ok(e);
        }
    }
    aliases
        .lookup(&key)
        .ok_or_else(|| UnknownLabel { raw: raw.trim().to_string() })
}

/// True when the raw vote is the reserved `"Other"` response.
pub fn is_other_vote(raw: &str) -> bool {
    normalize_key(raw) == "other"
}
