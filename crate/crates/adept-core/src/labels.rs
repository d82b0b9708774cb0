//! Ambiguity-preserving label construction from raw annotator votes.
//!
//! Ground truth is built with a plurality rule that keeps ties instead of
//! discarding them: every class sharing the maximal vote count becomes a
//! primary label, and every other voted class is kept as a minor label.
//! `"Other"` votes are removed before counting so the label space stays
//! closed over the eight canonical categories.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{canonicalize_emotion, is_other_vote, AliasTable, Emotion, ALL_EMOTIONS};

/// Raw annotator votes for one utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteRecord {
    pub utterance_id: String,
    /// Raw annotator strings; order is irrelevant to every downstream result.
    pub votes: Vec<String>,
}

/// Annotator agreement bucket, a pure function of the total label count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConsensusLevel {
    /// Exactly one label.
    High,
    /// Two or three labels.
    Medium,
    /// Four or more labels.
    Low,
}

impl ConsensusLevel {
    /// Bucket boundaries: {1}, {2,3}, {>=4}.
    pub fn from_label_count(count: usize) -> ConsensusLevel {
        match count {
            0 | 1 => ConsensusLevel::High,
            2 | 3 => ConsensusLevel::Medium,
            _ => ConsensusLevel::Low,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConsensusLevel::High => "High",
            ConsensusLevel::Medium => "Medium",
            ConsensusLevel::Low => "Low",
        }
    }
}

/// Derived ground truth for one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    /// Classes sharing the maximal vote count. Non-empty; more than one
    /// element means a tie.
    pub primary: BTreeSet<Emotion>,
    /// Every other class with at least one vote. Disjoint from `primary`.
    pub minor: BTreeSet<Emotion>,
    pub is_tie: bool,
    pub consensus_level: ConsensusLevel,
}

impl LabelSet {
    /// |primary| + |minor|.
    pub fn total_label_count(&self) -> usize {
        self.primary.len() + self.minor.len()
    }

    /// Full ground-truth set: primary ∪ minor.
    pub fn full_set(&self) -> BTreeSet<Emotion> {
        self.primary.union(&self.minor).copied().collect()
    }
}

/// Errors from label construction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("vote list is empty")]
    EmptyVotes,
    /// All votes were `"Other"`; the utterance carries no usable supervision.
    #[error("all votes filtered as \"Other\"")]
    EmptyAfterFilter,
    #[error("vote {index}: {source}")]
    UnknownVote {
        index: usize,
        #[source]
        source: crate::emotion::UnknownLabel,
    },
}

/// Build a [`LabelSet`] from raw votes with the plurality-with-ties rule.
///
/// `"Other"` votes are dropped before counting; the remaining votes must all
/// canonicalize. Classes at the maximal count become `primary` (all of them
/// on ties), every other voted class becomes `minor`.
pub fn construct_labels(votes: &VoteRecord, aliases: &AliasTable) -> Result<LabelSet, LabelError> {
    if votes.votes.is_empty() {
        return Err(LabelError::EmptyVotes);
    }

    let mut counts = [0usize; 8];
    let mut kept = 0usize;
    for (index, raw) in votes.votes.iter().enumerate() {
        if is_other_vote(raw) {
            continue;
        }
        let e = canonicalize_emotion(raw, aliases)
            .map_err(|source| LabelError::UnknownVote { index, source })?;
        counts[e.index()] += 1;
        kept += 1;
    }
    if kept == 0 {
        return Err(LabelError::EmptyAfterFilter);
    }

    let max_count = *counts.iter().max().expect("eight fixed classes");
    let mut primary = BTreeSet::new();
    let mut minor = BTreeSet::new();
    for e in ALL_EMOTIONS {
        let c = counts[e.index()];
        if c == 0 {
            continue;
        }
        if c == max_count {
            primary.insert(e);
        } else {
            minor.insert(e);
        }
    }

    let is_tie = primary.len() >= 2;
    let consensus_level = ConsensusLevel::from_label_count(primary.len() + minor.len());
    Ok(LabelSet { primary, minor, is_tie, consensus_level })
}

/// Corpus-level label statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub num_records: usize,
    pub tie_count: usize,
    pub tie_rate: f64,
    pub mean_label_count: f64,
    pub median_label_count: f64,
    pub min_label_count: usize,
    pub max_label_count: usize,
    pub mean_primary_count: f64,
    pub mean_minor_count: f64,
    /// Record counts per consensus level, keyed High/Medium/Low.
    pub consensus_histogram: [(String, usize); 3],
    /// Per emotion: number of records whose primary set contains it.
    pub primary_distribution: Vec<(String, usize)>,
    /// Per emotion: among records with it in the primary set, the tie fraction.
    pub per_emotion_tie_rate: Vec<(String, f64)>,
}

/// Fold label statistics over a corpus. Errors on empty input.
pub fn corpus_stats<'a, I>(labelsets: I) -> Result<StatsReport, LabelError>
where
    I: IntoIterator<Item = &'a LabelSet>,
{
    let sets: Vec<&LabelSet> = labelsets.into_iter().collect();
    if sets.is_empty() {
        return Err(LabelError::EmptyVotes);
    }

    let n = sets.len();
    let mut tie_count = 0usize;
    let mut counts: Vec<usize> = Vec::with_capacity(n);
    let mut primary_sum = 0usize;
    let mut minor_sum = 0usize;
    let mut consensus = [0usize; 3];
    let mut primary_dist = [0usize; 8];
    let mut primary_tie = [0usize; 8];

    for s in &sets {
        if s.is_tie {
            tie_count += 1;
        }
        counts.push(s.total_label_count());
        primary_sum += s.primary.len();
        minor_sum += s.minor.len();
        let bucket = match s.consensus_level {
            ConsensusLevel::High => 0,
            ConsensusLevel::Medium => 1,
            ConsensusLevel::Low => 2,
        };
        consensus[bucket] += 1;
        for e in &s.primary {
            primary_dist[e.index()] += 1;
            if s.is_tie {
                primary_tie[e.index()] += 1;
            }
        }
    }

    counts.sort_unstable();
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
    };
    let total: usize = counts.iter().sum();

    Ok(StatsReport {
        num_records: n,
        tie_count,
        tie_rate: tie_count as f64 / n as f64,
        mean_label_count: total as f64 / n as f64,
        median_label_count: median,
        min_label_count: counts[0],
        max_label_count: counts[n - 1],
        mean_primary_count: primary_sum as f64 / n as f64,
        mean_minor_count: minor_sum as f64 / n as f64,
        consensus_histogram: [
            ("High".to_string(), consensus[0]),
            ("Medium".to_string(), consensus[1]),
            ("Low".to_string(), consensus[2]),
        ],
        primary_distribution: ALL_EMOTIONS
            .iter()
            .map(|e| (e.name().to_string(), primary_dist[e.index()]))
            .collect(),
        per_emotion_tie_rate: ALL_EMOTIONS
            .iter()
            .map(|e| {
                let denom = primary_dist[e.index()];
                let rate = if denom == 0 {
                    0.0
                } else {
                    primary_tie[e.index()] as f64 / denom as f64
                };
                (e.name().to_string(), rate)
            })
            .collect(),
    })
}
