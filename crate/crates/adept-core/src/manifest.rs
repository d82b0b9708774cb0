//! JSONL manifest ingestion: one utterance per line.
//!
//! Line schema:
//! `{"id": str, "audio": str, "transcript": str,
//!   "alignment": [{"w": str, "s": float_sec, "e": float_sec}],
//!   "votes": [str], "speaker": str (optional)}`
//!
//! Loading validates word timing monotonicity and transcript/alignment token
//! agreement, and constructs the ground-truth [`LabelSet`] per record.
//! Strict mode aborts on the first bad line; lenient mode skips bad lines
//! and tallies them in the returned report.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::AliasTable;
use crate::labels::{construct_labels, LabelError, LabelSet, VoteRecord};

/// One aligned word with its time span in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSpan {
    #[serde(rename = "w")]
    pub word: String,
    #[serde(rename = "s")]
    pub start_s: f64,
    #[serde(rename = "e")]
    pub end_s: f64,
}

/// Fully validated utterance with derived labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio: PathBuf,
    pub transcript: String,
    pub alignment: Vec<WordSpan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    pub votes: VoteRecord,
    pub labels: LabelSet,
}

#[derive(Debug, Deserialize)]
struct RawLine {
    id: String,
    audio: String,
    transcript: String,
    alignment: Vec<WordSpan>,
    votes: Vec<String>,
    #[serde(default)]
    speaker: Option<String>,
}

/// Per-line ingestion failure.
#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: invalid JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: word {word_index}: non-monotone or negative times")]
    Alignment { line: usize, word_index: usize },
    #[error("line {line}: alignment words do not match transcript tokens (word {word_index})")]
    TranscriptMismatch { line: usize, word_index: usize },
    #[error("line {line}: {source}")]
    Label {
        line: usize,
        #[source]
        source: LabelError,
    },
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Outcome of a lenient load: records in file order plus the skip tally.
#[derive(Debug, Default, Serialize)]
pub struct LoadReport {
    pub lines_total: usize,
    pub records_loaded: usize,
    pub skipped_all_other: usize,
    pub skipped_invalid: usize,
    pub errors: Vec<String>,
}

/// Lowercase a token and strip terminal punctuation for transcript matching.
fn normalize_token(tok: &str) -> String {
    tok.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase()
}

fn validate_alignment(line: usize, raw: &RawLine) -> Result<(), ManifestError> {
    // Flattened [s0, e0, s1, e1, ...] must be non-decreasing and start >= 0.
    let mut prev = 0.0f64;
    for (i, w) in raw.alignment.iter().enumerate() {
        if w.start_s < 0.0 || w.start_s < prev || w.end_s < w.start_s {
            return Err(ManifestError::Alignment { line, word_index: i });
        }
        prev = w.end_s;
    }

    let transcript_tokens: Vec<String> = raw
        .transcript
        .split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect();
    let aligned_tokens: Vec<String> = raw
        .alignment
        .iter()
        .map(|w| normalize_token(&w.word))
        .filter(|t| !t.is_empty())
        .collect();
    if transcript_tokens != aligned_tokens {
        let word_index = transcript_tokens
            .iter()
            .zip(aligned_tokens.iter())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| transcript_tokens.len().min(aligned_tokens.len()));
        return Err(ManifestError::TranscriptMismatch { line, word_index });
    }
    Ok(())
}

fn parse_line(
    line_no: usize,
    text: &str,
    aliases: &AliasTable,
) -> Result<UtteranceRecord, ManifestError> {
    let raw: RawLine = serde_json::from_str(text)
        .map_err(|source| ManifestError::Json { line: line_no, source })?;
    validate_alignment(line_no, &raw)?;
    let votes = VoteRecord { utterance_id: raw.id.clone(), votes: raw.votes };
    let labels = construct_labels(&votes, aliases)
        .map_err(|source| ManifestError::Label { line: line_no, source })?;
    Ok(UtteranceRecord {
        id: raw.id,
        audio: PathBuf::from(raw.audio),
        transcript: raw.transcript,
        alignment: raw.alignment,
        speaker: raw.speaker,
        votes,
        labels,
    })
}

/// Load a manifest. Record order equals file order.
///
/// In strict mode the first bad line aborts the load. In lenient mode bad
/// lines are skipped; all-"Other" utterances are tallied separately since
/// their exclusion is expected behavior, not data corruption.
pub fn load_manifest(
    path: &Path,
    strict: bool,
    aliases: &AliasTable,
) -> Result<(Vec<UtteranceRecord>, LoadReport), ManifestError> {
    let file = File::open(path)
        .map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut report = LoadReport::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text =
            line.map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        if text.trim().is_empty() {
            continue;
        }
        report.lines_total += 1;
        match parse_line(line_no, &text, aliases) {
            Ok(rec) => {
                records.push(rec);
                report.records_loaded += 1;
            }
            Err(e) if strict => return Err(e),
            Err(e) => {
                match &e {
                    ManifestError::Label { source: LabelError::EmptyAfterFilter, .. } => {
                        report.skipped_all_other += 1;
                    }
                    _ => report.skipped_invalid += 1,
                }
                report.errors.push(e.to_string());
            }
        }
    }
    Ok((records, report))
}
