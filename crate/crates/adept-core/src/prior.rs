//! Corpus-level co-occurrence structures and the pair-scheduling queries
//! served to the agent's structural-prior tool.
//!
//! Two 8×8 count matrices are accumulated from training labels: a
//! primary–minor matrix (each primary class paired with each minor class of
//! the same utterance) and a symmetric tie matrix (each unordered pair of
//! tied primary classes). Both are symmetrically normalized by row-sum
//! geometry and fused into a single pair-strength table used for ranking.
//!
//! Query answers are ranked pair/candidate lists only. They never contain a
//! label decision, a probability, or instance-level confidence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{Emotion, ALL_EMOTIONS};
use crate::labels::LabelSet;

/// Default normalization guard.
pub const DEFAULT_EPSILON: f64 = 1e-8;
/// Default fusion weight.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Default number of priority pairs returned.
pub const DEFAULT_TOP_K: usize = 3;
/// Default number of expansion suggestions returned.
pub const DEFAULT_TOP_L: usize = 2;

/// 8×8 matrix over the emotion index space.
pub type Matrix8 = [[f64; 8]; 8];

fn zero_matrix() -> Matrix8 {
    [[0.0; 8]; 8]
}

/// Raw co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceCounts {
    /// Rows: primary class, cols: minor class.
    pub pm: Matrix8,
    /// Symmetric with zero diagonal.
    pub tie: Matrix8,
}

impl Default for CooccurrenceCounts {
    fn default() -> Self {
        Self { pm: zero_matrix(), tie: zero_matrix() }
    }
}

/// Accumulate counts over a corpus of label sets.
///
/// For each record: `pm[p][m] += 1` for every primary p and minor m, and for
/// every unordered pair {a, b} within the primary set (all pairs when the tie
/// spans more than two classes) the tie matrix gains one symmetrically.
pub fn accumulate<'a, I>(labelsets: I) -> CooccurrenceCounts
where
    I: IntoIterator<Item = &'a LabelSet>,
{
    let mut counts = CooccurrenceCounts::default();
    for ls in labelsets {
        for p in &ls.primary {
            for m in &ls.minor {
                counts.pm[p.index()][m.index()] += 1.0;
            }
        }
        let primary: Vec<Emotion> = ls.primary.iter().copied().collect();
        for i in 0..primary.len() {
            for j in (i + 1)..primary.len() {
                let (a, b) = (primary[i].index(), primary[j].index());
                counts.tie[a][b] += 1.0;
                counts.tie[b][a] += 1.0;
            }
        }
    }
    counts
}

/// Symmetric normalization: `out[a][b] = c[a][b] / (sqrt(row_a * row_b) + eps)`
/// with `row_x` the row sum of `c`. Zero numerators map to 0 even when both
/// row sums vanish, so the output is always finite.
pub fn normalize(c: &Matrix8, epsilon: f64) -> Matrix8 {
    let row_sums: Vec<f64> = c.iter().map(|row| row.iter().sum()).collect();
    let mut out = zero_matrix();
    for a in 0..8 {
        for b in 0..8 {
            if c[a][b] == 0.0 {
                continue;
            }
            out[a][b] = c[a][b] / ((row_sums[a] * row_sums[b]).sqrt() + epsilon);
        }
    }
    out
}

/// Elementwise convex combination: `lambda * pm + (1 - lambda) * tie`.
pub fn fuse(pm_norm: &Matrix8, tie_norm: &Matrix8, lambda: f64) -> Matrix8 {
    let mut out = zero_matrix();
    for a in 0..8 {
        for b in 0..8 {
            out[a][b] = lambda * pm_norm[a][b] + (1.0 - lambda) * tie_norm[a][b];
        }
    }
    out
}

/// The built prior artifact: counts, normalized matrices, fused scores,
/// and the parameters plus source fingerprint they were built with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorTable {
    pub counts: CooccurrenceCounts,
    pub pm_norm: Matrix8,
    pub tie_norm: Matrix8,
    pub fused: Matrix8,
    pub lambda: f64,
    pub epsilon: f64,
    /// Hash of the training manifest the table was built from.
    pub source_fingerprint: String,
}

impl PriorTable {
    /// Build the full table from accumulated counts.
    pub fn build(
        counts: CooccurrenceCounts,
        lambda: f64,
        epsilon: f64,
        source_fingerprint: String,
    ) -> PriorTable {
        let pm_norm = normalize(&counts.pm, epsilon);
        let tie_norm = normalize(&counts.tie, epsilon);
        let fused = fuse(&pm_norm, &tie_norm, lambda);
        PriorTable { counts, pm_norm, tie_norm, fused, lambda, epsilon, source_fingerprint }
    }

    /// Fused pair strength, symmetrized over orientation. `pm` is not
    /// symmetric, so pair-level ranking uses the max over both orders.
    pub fn pair_strength(&self, a: Emotion, b: Emotion) -> f64 {
        self.fused[a.index()][b.index()].max(self.fused[b.index()][a.index()])
    }

    /// Normalized tie strength for a pair (already symmetric).
    pub fn tie_strength(&self, a: Emotion, b: Emotion) -> f64 {
        self.tie_norm[a.index()][b.index()]
    }
}

/// What the caller wants ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryIntent {
    /// Rank pairs inside the candidate set for contrastive verification.
    Verify,
    /// Suggest candidates outside the set for backtracking expansion.
    Expand,
}

/// A scheduling query against the prior table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorQuery {
    pub candidates: Vec<Emotion>,
    pub intent: QueryIntent,
    /// Current focus emotion; pairs containing it rank first in verify mode.
    #[serde(default)]
    pub anchor: Option<Emotion>,
    /// Additionally rank tie-prone pairs by the tie matrix.
    #[serde(default)]
    pub tie_mode: bool,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub top_l: Option<usize>,
}

/// Ranked scheduling signals. Pairs are ordered `(a, b)` with `a < b` by
/// emotion index; no field carries a decision or score.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorAnswer {
    pub priority_pairs: Vec<(Emotion, Emotion)>,
    pub suggested_candidates: Vec<Emotion>,
    pub tie_priority_pairs: Vec<(Emotion, Emotion)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriorQueryError {
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("anchor {0} is not in the candidate set")]
    AnchorNotInCandidates(Emotion),
}

fn dedup_candidates(candidates: &[Emotion]) -> Vec<Emotion> {
    let mut seen = [false; 8];
    let mut out = Vec::new();
    for &e in candidates {
        if !seen[e.index()] {
            seen[e.index()] = true;
            out.push(e);
        }
    }
    out
}

/// All unordered pairs within `set`, index-ordered within each pair.
fn pairs_within(set: &[Emotion]) -> Vec<(Emotion, Emotion)> {
    let mut sorted: Vec<Emotion> = set.to_vec();
    sorted.sort_by_key(|e| e.index());
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            out.push((sorted[i], sorted[j]));
        }
    }
    out
}

/// Sort pairs by score descending, breaking exact score ties by ascending
/// index pair so answers are fully deterministic.
fn rank_pairs(
    mut pairs: Vec<(Emotion, Emotion)>,
    score: impl Fn(Emotion, Emotion) -> f64,
) -> Vec<(Emotion, Emotion)> {
    pairs.sort_by(|&(a1, b1), &(a2, b2)| {
        score(a2, b2)
            .partial_cmp(&score(a1, b1))
            .expect("finite scores")
            .then_with(|| (a1.index(), b1.index()).cmp(&(a2.index(), b2.index())))
    });
    pairs
}

/// Answer a scheduling query. A pure function of `(table, query)`.
pub fn query(table: &PriorTable, q: &PriorQuery) -> Result<PriorAnswer, PriorQueryError> {
    let candidates = dedup_candidates(&q.candidates);
    if candidates.is_empty() {
        return Err(PriorQueryError::EmptyCandidateSet);
    }
    if let Some(anchor) = q.anchor {
        if !candidates.contains(&anchor) {
            return Err(PriorQueryError::AnchorNotInCandidates(anchor));
        }
    }
    let top_k = q.top_k.unwrap_or(DEFAULT_TOP_K);
    let top_l = q.top_l.unwrap_or(DEFAULT_TOP_L);

    let mut answer = PriorAnswer::default();

    match q.intent {
        QueryIntent::Verify => {
            let ranked =
                rank_pairs(pairs_within(&candidates), |a, b| table.pair_strength(a, b));
            let selected: Vec<(Emotion, Emotion)> = match q.anchor {
                Some(anchor) => {
                    // Anchor-containing pairs first, then fill from the
                    // global ranking.
                    let (with, without): (Vec<_>, Vec<_>) = ranked
                        .into_iter()
                        .partition(|&(a, b)| a == anchor || b == anchor);
                    with.into_iter().chain(without).take(top_k).collect()
                }
                None => ranked.into_iter().take(top_k).collect(),
            };
            answer.priority_pairs = selected;
        }
        QueryIntent::Expand => {
            let mut outside: Vec<Emotion> = ALL_EMOTIONS
                .iter()
                .copied()
                .filter(|e| !candidates.contains(e))
                .collect();
            let reach = |c: Emotion| -> f64 {
                candidates
                    .iter()
                    .map(|&a| table.pair_strength(a, c))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            outside.sort_by(|&c1, &c2| {
                reach(c2)
                    .partial_cmp(&reach(c1))
                    .expect("finite scores")
                    .then_with(|| c1.index().cmp(&c2.index()))
            });
            answer.suggested_candidates = outside.into_iter().take(top_l).collect();
        }
    }

    if q.tie_mode {
        answer.tie_priority_pairs =
            rank_pairs(pairs_within(&candidates), |a, b| table.tie_strength(a, b))
                .into_iter()
                .take(top_k)
                .collect();
    }

    Ok(answer)
}
