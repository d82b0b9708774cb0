//! Emotion-neutral acoustic probing: span anchoring, hotspot navigation,
//! segment measurement with dual-reference bucketing, and segment
//! comparison.
//!
//! Nothing in this module emits an emotion label, score, or interpretation.
//! Every observation reports physical signal summaries plus the discretized
//! evidence bins derived from two robust z-scores: `z_g` against a global
//! (training-corpus or speaker) reference and `z_l` against the current
//! utterance. Provenance records which reference produced each bin.

use std::collections::BTreeMap;
use std::ops::Range;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::dsp::{self, extract_frames, FrameParams, FrameTrack};
use crate::manifest::WordSpan;

/// Guard added to every IQR denominator so degenerate references stay finite.
pub const EPS_REF: f64 = 1e-9;

/// Default padding applied around anchored word spans.
pub const DEFAULT_PADDING_S: f64 = 0.075;

/// Hotspot scan window length and step.
pub const HOTSPOT_WINDOW_S: f64 = 0.3;
pub const HOTSPOT_STEP_S: f64 = 0.15;

/// The supported measurement set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    F0Median,
    F0Iqr,
    PitchVelocity,
    Rms,
    EnergyBurstiness,
    SpeechRate,
    PauseDensity,
    VoicedRatio,
    Jitter,
    Shimmer,
    Hnr,
    SpectralTilt,
}

/// All supported metrics, the full-probe set used by audio replay.
pub const ALL_METRICS: [MetricKind; 12] = [
    MetricKind::F0Median,
    MetricKind::F0Iqr,
    MetricKind::PitchVelocity,
    MetricKind::Rms,
    MetricKind::EnergyBurstiness,
    MetricKind::SpeechRate,
    MetricKind::PauseDensity,
    MetricKind::VoicedRatio,
    MetricKind::Jitter,
    MetricKind::Shimmer,
    MetricKind::Hnr,
    MetricKind::SpectralTilt,
];

impl MetricKind {
    /// Wire name used in tool arguments and reference files.
    pub fn wire_name(self) -> &'static str {
        match self {
            MetricKind::F0Median => "f0_median",
            MetricKind::F0Iqr => "f0_iqr",
            MetricKind::PitchVelocity => "pitch_velocity",
            MetricKind::Rms => "rms",
            MetricKind::EnergyBurstiness => "energy_burstiness",
            MetricKind::SpeechRate => "speech_rate",
            MetricKind::PauseDensity => "pause_density",
            MetricKind::VoicedRatio => "voiced_ratio",
            MetricKind::Jitter => "jitter",
            MetricKind::Shimmer => "shimmer",
            MetricKind::Hnr => "hnr",
            MetricKind::SpectralTilt => "spectral_tilt",
        }
    }

    pub fn from_wire(name: &str) -> Option<MetricKind> {
        ALL_METRICS.iter().copied().find(|m| m.wire_name() == name)
    }

    /// Metrics with a frame-level base series support volatility bucketing
    /// and fine-grained local references; segment-scalar metrics fall back
    /// to sliding-window statistics.
    fn frame_backed(self) -> bool {
        matches!(
            self,
            MetricKind::F0Median
                | MetricKind::F0Iqr
                | MetricKind::PitchVelocity
                | MetricKind::Rms
                | MetricKind::EnergyBurstiness
        )
    }
}

/// Robust location/spread pair for one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefStats {
    pub median: f64,
    pub iqr: f64,
}

/// Resolved global reference for one scope: metric wire name -> stats.
pub type MetricRefMap = BTreeMap<String, RefStats>;

/// Bucketing thresholds. Defaults: Low below -1, High above +1, volatility
/// ratio 1, similarity gap 0.25, strong gap 1.5, spike percentile 99,
/// minimum pause 200 ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinThresholds {
    pub level_low_z: f64,
    pub level_high_z: f64,
    pub volatility_ratio: f64,
    pub similar_dz: f64,
    pub strong_dz: f64,
    pub spike_percentile: f64,
    pub pause_min_s: f64,
}

impl Default for BinThresholds {
    fn default() -> Self {
        Self {
            level_low_z: -1.0,
            level_high_z: 1.0,
            volatility_ratio: 1.0,
            similar_dz: 0.25,
            strong_dz: 1.5,
            spike_percentile: 99.0,
            pause_min_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelBin {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolatilityBin {
    Stable,
    Volatile,
}

/// Level bucketing: `(-inf, low)` -> Low, `[low, high]` -> Mid,
/// `(high, inf)` -> High. Boundary values are Mid.
pub fn level_bin(z: f64, thresholds: &BinThresholds) -> LevelBin {
    if z < thresholds.level_low_z {
        LevelBin::Low
    } else if z > thresholds.level_high_z {
        LevelBin::High
    } else {
        LevelBin::Mid
    }
}

/// One measured metric inside an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricObservation {
    pub metric: MetricKind,
    /// Raw summary value in the metric's native unit.
    pub value: f64,
    /// Robust z against the global reference; absent when no reference was
    /// available for this metric.
    pub z_global: Option<f64>,
    /// Robust z against the utterance-local reference.
    pub z_local: f64,
    pub level: LevelBin,
    pub volatility: VolatilityBin,
}

/// Where the bins came from, for external auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub t_s: f64,
    pub t_e: f64,
    /// "global+local" when a global reference backed the level bins,
    /// "local_only" otherwise.
    pub reference: String,
    /// Flags such as `missing_global_reference:<metric>`.
    pub flags: Vec<String>,
}

/// Auditable measurement bundle for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticObservation {
    pub t_s: f64,
    pub t_e: f64,
    pub metrics: Vec<MetricObservation>,
    /// Requested metrics that had insufficient data in the segment.
    pub skipped: Vec<(MetricKind, String)>,
    /// Event flags, e.g. `sudden_spike`.
    pub events: Vec<String>,
    pub provenance: Provenance,
}

/// Hotspot focus families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusType {
    EnergyBurst,
    PitchExcursion,
    PauseContrast,
    VoicingInstability,
}

impl FocusType {
    pub fn wire_name(self) -> &'static str {
        match self {
            FocusType::EnergyBurst => "energy_burst",
            FocusType::PitchExcursion => "pitch_excursion",
            FocusType::PauseContrast => "pause_contrast",
            FocusType::VoicingInstability => "voicing_instability",
        }
    }

    pub fn from_wire(name: &str) -> Option<FocusType> {
        [
            FocusType::EnergyBurst,
            FocusType::PitchExcursion,
            FocusType::PauseContrast,
            FocusType::VoicingInstability,
        ]
        .into_iter()
        .find(|f| f.wire_name() == name)
    }

    fn rationale(self) -> &'static str {
        match self {
            FocusType::EnergyBurst => "energy spike",
            FocusType::PitchExcursion => "rapid F0 change",
            FocusType::PauseContrast => "long pause against speech",
            FocusType::VoicingInstability => "voicing flips",
        }
    }
}

/// A ranked region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub t_s: f64,
    pub t_e: f64,
    pub focus_type: FocusType,
    pub magnitude: f64,
    pub rationale: String,
}

/// Hotspot scan result; `no_voiced_frames` flags a pitch-family scan over
/// fully unvoiced audio (empty list, not an error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotOutcome {
    pub rois: Vec<Roi>,
    pub no_voiced_frames: bool,
}

/// Pairwise relation between two segments on one metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">>")]
    MuchGreater,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "~")]
    Similar,
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<<")]
    MuchLess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRelation {
    /// Segment indices into the comparison input.
    pub a: usize,
    pub b: usize,
    pub delta_z: f64,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRelations {
    pub metric: MetricKind,
    pub pairs: Vec<PairRelation>,
    /// Segment indices ordered by descending local z (ties by index).
    pub ranking: Vec<usize>,
}

/// Relational report across two or more segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentComparison {
    pub segments: Vec<(f64, f64)>,
    pub observations: Vec<AcousticObservation>,
    pub per_metric: Vec<MetricRelations>,
}

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error(transparent)]
    Dsp(#[from] dsp::DspError),
    #[error("segment [{t_s:.3}, {t_e:.3}] has fewer than {min_frames} frames")]
    SegmentTooShort { t_s: f64, t_e: f64, min_frames: usize },
    #[error("unknown metric: {0}")]
    UnknownMetric(String),
    #[error("word index {index} out of range (alignment has {len} words)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("segment [{t_s:.3}, {t_e:.3}] out of bounds (duration {duration:.3})")]
    SegmentOutOfBounds { t_s: f64, t_e: f64, duration: f64 },
    #[error("need at least two segments to compare")]
    NotEnoughSegments,
}

/// An utterance's audio with its cached frame analysis. Immutable once
/// built; safe to share across concurrent trajectory rollouts.
#[derive(Debug, Clone)]
pub struct AnalyzedUtterance {
    pub audio: AudioBuffer,
    pub track: FrameTrack,
}

impl AnalyzedUtterance {
    pub fn analyze(audio: AudioBuffer, params: &FrameParams) -> Result<Self, AcousticError> {
        let track = extract_frames(&audio, params)?;
        Ok(Self { audio, track })
    }

    pub fn duration_s(&self) -> f64 {
        self.track.duration_s
    }
}

/// Map a word-index span to a time segment: convex hull of the selected
/// words, padded and clamped to `[0, duration]`. Discontinuous index sets
/// still hull over everything between their extremes.
pub fn anchor_span(
    alignment: &[WordSpan],
    word_indices: &[usize],
    padding_s: f64,
    duration_s: f64,
) -> Result<(f64, f64), AcousticError> {
    if word_indices.is_empty() {
        return Err(AcousticError::IndexOutOfRange { index: 0, len: alignment.len() });
    }
    let mut t_s = f64::INFINITY;
    let mut t_e = f64::NEG_INFINITY;
    for &i in word_indices {
        let w = alignment
            .get(i)
            .ok_or(AcousticError::IndexOutOfRange { index: i, len: alignment.len() })?;
        t_s = t_s.min(w.start_s);
        t_e = t_e.max(w.end_s);
    }
    Ok(((t_s - padding_s).max(0.0), (t_e + padding_s).min(duration_s)))
}

// ---------------------------------------------------------------------------
// Metric evaluation
// ---------------------------------------------------------------------------

/// Direct segment summary for one metric; `None` when the segment carries
/// insufficient data (e.g. no voiced frames for an F0 statistic).
fn segment_value(
    metric: MetricKind,
    utt: &AnalyzedUtterance,
    frames: Range<usize>,
    thresholds: &BinThresholds,
) -> Option<f64> {
    let track = &utt.track;
    match metric {
        MetricKind::F0Median => dsp::median(&track.voiced_f0(frames)),
        MetricKind::F0Iqr => dsp::iqr(&track.voiced_f0(frames)),
        MetricKind::PitchVelocity => {
            let abs: Vec<f64> = track.delta_f0(frames).iter().map(|d| d.abs()).collect();
            dsp::percentile(&abs, 75.0)
        }
        MetricKind::Rms => dsp::median(&rms_in(track, frames)),
        MetricKind::EnergyBurstiness => dsp::percentile(&track.delta_e(frames), 90.0),
        MetricKind::SpeechRate => {
            let dur = frames.len() as f64 * track.params.hop_s;
            if dur <= 0.0 {
                return None;
            }
            Some(voiced_runs(track, frames) as f64 / dur)
        }
        MetricKind::PauseDensity => {
            let dur = frames.len() as f64 * track.params.hop_s;
            if dur <= 0.0 {
                return None;
            }
            Some(pause_time(track, frames, thresholds.pause_min_s) / dur)
        }
        MetricKind::VoicedRatio => {
            if frames.is_empty() {
                return None;
            }
            let voiced = frames.clone().filter(|&i| track.voiced[i]).count();
            Some(voiced as f64 / frames.len() as f64)
        }
        MetricKind::Jitter => perturbation(track, frames, |t, i| 1.0 / t.f0[i]),
        MetricKind::Shimmer => perturbation(track, frames, |t, i| t.rms[i]),
        MetricKind::Hnr => {
            let vals: Vec<f64> = frames
                .filter(|&i| track.voiced[i])
                .map(|i| {
                    let r = track.clarity[i].clamp(1e-6, 1.0 - 1e-6);
                    10.0 * (r / (1.0 - r)).log10()
                })
                .collect();
            dsp::median(&vals)
        }
        MetricKind::SpectralTilt => spectral_tilt(utt, frames),
    }
}

fn rms_in(track: &FrameTrack, frames: Range<usize>) -> Vec<f64> {
    frames.map(|i| track.rms[i]).collect()
}

/// Count of maximal runs of consecutive voiced frames.
fn voiced_runs(track: &FrameTrack, frames: Range<usize>) -> usize {
    let mut runs = 0;
    let mut in_run = false;
    for i in frames {
        if track.voiced[i] {
            if !in_run {
                runs += 1;
                in_run = true;
            }
        } else {
            in_run = false;
        }
    }
    runs
}

/// Total duration of unvoiced runs at least `min_s` long.
fn pause_time(track: &FrameTrack, frames: Range<usize>, min_s: f64) -> f64 {
    let hop = track.params.hop_s;
    let mut total = 0.0;
    let mut run = 0usize;
    let flush = |run: usize| {
        let dur = run as f64 * hop;
        if dur >= min_s {
            dur
        } else {
            0.0
        }
    };
    for i in frames {
        if track.voiced[i] {
            total += flush(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    total + flush(run)
}

/// Mean absolute perturbation of `attr` over consecutive voiced frame
/// pairs, relative to the mean attribute value (local jitter/shimmer form).
fn perturbation(
    track: &FrameTrack,
    frames: Range<usize>,
    attr: impl Fn(&FrameTrack, usize) -> f64,
) -> Option<f64> {
    let mut diffs = Vec::new();
    let mut values = Vec::new();
    let mut prev: Option<f64> = None;
    for i in frames {
        if track.voiced[i] {
            let v = attr(track, i);
            values.push(v);
            if let Some(p) = prev {
                diffs.push((v - p).abs());
            }
            prev = Some(v);
        } else {
            prev = None;
        }
    }
    if diffs.is_empty() {
        return None;
    }
    let mean_v = values.iter().sum::<f64>() / values.len() as f64;
    if mean_v.abs() < 1e-12 {
        return None;
    }
    Some(diffs.iter().sum::<f64>() / diffs.len() as f64 / mean_v)
}

/// Slope (dB per kHz) of a least-squares line fit to the averaged
/// log-magnitude spectrum between 0 and 4 kHz.
fn spectral_tilt(utt: &AnalyzedUtterance, frames: Range<usize>) -> Option<f64> {
    const FFT_SIZE: usize = 512;
    let track = &utt.track;
    let sr = track.sample_rate as f64;
    let win = (track.params.window_s * sr).round() as usize;
    let hop = (track.params.hop_s * sr).round() as usize;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FFT_SIZE);
    let mut acc = vec![0.0f64; FFT_SIZE / 2];
    let mut n_frames = 0usize;

    for i in frames {
        let start = i * hop;
        let end = (start + win).min(utt.audio.samples.len());
        if start >= end {
            continue;
        }
        let mut buf: Vec<Complex<f64>> = (0..FFT_SIZE)
            .map(|k| {
                let idx = start + k;
                let s = if k < end - start && idx < utt.audio.samples.len() {
                    // Hann window over the frame length.
                    let w = 0.5
                        - 0.5
                            * (2.0 * std::f64::consts::PI * k as f64 / (end - start) as f64)
                                .cos();
                    utt.audio.samples[idx] * w
                } else {
                    0.0
                };
                Complex::new(s, 0.0)
            })
            .collect();
        fft.process(&mut buf);
        for (k, c) in buf.iter().take(FFT_SIZE / 2).enumerate() {
            acc[k] += c.norm_sqr();
        }
        n_frames += 1;
    }
    if n_frames == 0 {
        return None;
    }

    let bin_hz = sr / FFT_SIZE as f64;
    let max_bin = ((4000.0 / bin_hz).floor() as usize).min(FFT_SIZE / 2 - 1);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 1..=max_bin {
        let p = acc[k] / n_frames as f64;
        if p > 1e-20 {
            xs.push(k as f64 * bin_hz / 1000.0);
            ys.push(10.0 * p.log10());
        }
    }
    if xs.len() < 2 {
        return None;
    }
    // Least-squares slope.
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Frame-level base series backing a metric within a range. Used for the
/// utterance-local reference and for volatility. Segment-scalar metrics use
/// sliding-window summaries instead.
fn base_series(
    metric: MetricKind,
    utt: &AnalyzedUtterance,
    frames: Range<usize>,
    thresholds: &BinThresholds,
) -> Vec<f64> {
    let track = &utt.track;
    match metric {
        MetricKind::F0Median | MetricKind::F0Iqr => track.voiced_f0(frames),
        MetricKind::PitchVelocity => {
            track.delta_f0(frames).iter().map(|d| d.abs()).collect()
        }
        MetricKind::Rms => rms_in(track, frames),
        MetricKind::EnergyBurstiness => track.delta_e(frames),
        _ => sliding_summaries(metric, utt, frames, thresholds),
    }
}

/// Metric summaries over sliding windows spanning a frame range.
fn sliding_summaries(
    metric: MetricKind,
    utt: &AnalyzedUtterance,
    frames: Range<usize>,
    thresholds: &BinThresholds,
) -> Vec<f64> {
    let hop = utt.track.params.hop_s;
    let w_frames = (HOTSPOT_WINDOW_S / hop).round() as usize;
    let step = (HOTSPOT_STEP_S / hop).round() as usize;
    if w_frames == 0 || step == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = frames.start;
    while start < frames.end {
        let end = (start + w_frames).min(frames.end);
        if end > start {
            if let Some(v) = segment_value(metric, utt, start..end, thresholds) {
                out.push(v);
            }
        }
        if end == frames.end {
            break;
        }
        start += step;
    }
    out
}

/// Utterance-local reference for one metric: median and IQR of its base
/// series across the whole utterance.
fn local_reference(
    metric: MetricKind,
    utt: &AnalyzedUtterance,
    thresholds: &BinThresholds,
) -> Option<RefStats> {
    let all = 0..utt.track.len();
    let base = base_series(metric, utt, all, thresholds);
    let median = dsp::median(&base)?;
    let iqr = dsp::iqr(&base).unwrap_or(0.0);
    Some(RefStats { median, iqr })
}

fn robust_z(value: f64, stats: &RefStats) -> f64 {
    (value - stats.median) / (stats.iqr + EPS_REF)
}

/// Volatility: IQR of the base-series derivative inside the segment,
/// normalized by the utterance-wide derivative IQR; Volatile above the
/// ratio threshold. Only frame-backed metrics have enough resolution;
/// segment-scalar metrics report Stable.
fn volatility_bin(
    metric: MetricKind,
    utt: &AnalyzedUtterance,
    frames: Range<usize>,
    thresholds: &BinThresholds,
) -> VolatilityBin {
    if !metric.frame_backed() {
        return VolatilityBin::Stable;
    }
    let seg = base_series(metric, utt, frames, thresholds);
    let all = base_series(metric, utt, 0..utt.track.len(), thresholds);
    let diff = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| w[1] - w[0]).collect() };
    let seg_iqr = dsp::iqr(&diff(&seg)).unwrap_or(0.0);
    let all_iqr = dsp::iqr(&diff(&all)).unwrap_or(0.0);
    if seg_iqr / (all_iqr + EPS_REF) > thresholds.volatility_ratio {
        VolatilityBin::Volatile
    } else {
        VolatilityBin::Stable
    }
}

/// Measure a segment and bucket every requested metric.
///
/// Level bins come from `z_g` when a global reference covers the metric;
/// otherwise the observation falls back to `z_l` and the provenance is
/// flagged with `missing_global_reference:<metric>`.
pub fn analyze_segment(
    utt: &AnalyzedUtterance,
    t_s: f64,
    t_e: f64,
    metrics: &[MetricKind],
    global_refs: Option<&MetricRefMap>,
    thresholds: &BinThresholds,
) -> Result<AcousticObservation, AcousticError> {
    let duration = utt.duration_s();
    if t_s < 0.0 || t_e > duration + 1e-9 || t_s >= t_e {
        return Err(AcousticError::SegmentOutOfBounds { t_s, t_e, duration });
    }
    let frames = utt.track.frames_in(t_s, t_e);
    if frames.len() < 3 {
        return Err(AcousticError::SegmentTooShort { t_s, t_e, min_frames: 3 });
    }

    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut flags = Vec::new();
    let mut any_global = false;

    for &metric in metrics {
        let Some(value) = segment_value(metric, utt, frames.clone(), thresholds) else {
            skipped.push((metric, "insufficient data in segment".to_string()));
            continue;
        };
        let local = match local_reference(metric, utt, thresholds) {
            Some(stats) => stats,
            None => {
                flags.push(format!("missing_local_reference:{}", metric.wire_name()));
                RefStats { median: value, iqr: 0.0 }
            }
        };
        let z_local = robust_z(value, &local);

        let z_global = global_refs
            .and_then(|map| map.get(metric.wire_name()))
            .map(|stats| robust_z(value, stats));
        if z_global.is_some() {
            any_global = true;
        } else {
            flags.push(format!("missing_global_reference:{}", metric.wire_name()));
        }

        let level = level_bin(z_global.unwrap_or(z_local), thresholds);
        let volatility = volatility_bin(metric, utt, frames.clone(), thresholds);
        out.push(MetricObservation { metric, value, z_global, z_local, level, volatility });
    }

    let mut events = Vec::new();
    let seg_de = utt.track.delta_e(frames.clone());
    let all_de = utt.track.delta_e(0..utt.track.len());
    if let Some(p99) = dsp::percentile(&all_de, thresholds.spike_percentile) {
        if seg_de.iter().any(|&d| d > p99) {
            events.push("sudden_spike".to_string());
        }
    }

    Ok(AcousticObservation {
        t_s,
        t_e,
        metrics: out,
        skipped,
        events,
        provenance: Provenance {
            t_s,
            t_e,
            reference: if any_global { "global+local" } else { "local_only" }.to_string(),
            flags,
        },
    })
}

/// Scan for information-rich regions under a focus type. Windows of 300 ms
/// at 50% overlap are scored, suppressed at 50% overlap, and the `top_n`
/// survivors returned by descending magnitude (ties: earlier start first).
pub fn find_hotspots(
    utt: &AnalyzedUtterance,
    focus: FocusType,
    top_n: usize,
    thresholds: &BinThresholds,
) -> HotspotOutcome {
    let track = &utt.track;
    let hop = track.params.hop_s;
    let duration = utt.duration_s();

    if focus == FocusType::PitchExcursion && !track.voiced.iter().any(|&v| v) {
        return HotspotOutcome { rois: Vec::new(), no_voiced_frames: true };
    }

    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    let mut start = 0.0f64;
    while start + 1e-9 < duration {
        let end = (start + HOTSPOT_WINDOW_S).min(duration);
        let frames = track.frames_in(start, end);
        if frames.len() >= 2 {
            let score = match focus {
                FocusType::EnergyBurst => track
                    .delta_e(frames)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
                    .max(0.0),
                FocusType::PitchExcursion => track
                    .delta_f0(frames)
                    .into_iter()
                    .map(f64::abs)
                    .fold(0.0f64, f64::max),
                FocusType::PauseContrast => {
                    let has_voiced = frames.clone().any(|i| track.voiced[i]);
                    if has_voiced {
                        longest_unvoiced_run(track, frames) as f64 * hop
                    } else {
                        0.0
                    }
                }
                FocusType::VoicingInstability => {
                    let flips = frames
                        .clone()
                        .skip(1)
                        .filter(|&i| track.voiced[i] != track.voiced[i - 1])
                        .count();
                    flips as f64 / ((end - start).max(hop))
                }
            };
            // Noise floors: sub-threshold events are not hotspots.
            let min_score = match focus {
                FocusType::EnergyBurst => 1e-4,
                FocusType::PitchExcursion => 2.0,
                FocusType::PauseContrast => thresholds.pause_min_s,
                FocusType::VoicingInstability => 1e-9,
            };
            if score >= min_score {
                candidates.push((start, end, score));
            }
        }
        start += HOTSPOT_STEP_S;
    }

    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2).expect("finite scores").then(
            a.0.partial_cmp(&b.0).expect("finite starts"),
        )
    });

    // Non-maximum suppression at 50% window overlap.
    let mut kept: Vec<(f64, f64, f64)> = Vec::new();
    for cand in candidates {
        if kept.len() >= top_n {
            break;
        }
        let rejected = kept.iter().any(|k| {
            let overlap = (cand.1.min(k.1) - cand.0.max(k.0)).max(0.0);
            let min_len = (cand.1 - cand.0).min(k.1 - k.0);
            min_len > 0.0 && overlap / min_len >= 0.5
        });
        if !rejected {
            kept.push(cand);
        }
    }

    let rois = kept
        .into_iter()
        .map(|(t_s, t_e, magnitude)| Roi {
            t_s,
            t_e,
            focus_type: focus,
            magnitude,
            rationale: focus.rationale().to_string(),
        })
        .collect();
    HotspotOutcome { rois, no_voiced_frames: false }
}

fn longest_unvoiced_run(track: &FrameTrack, frames: Range<usize>) -> usize {
    let mut best = 0usize;
    let mut run = 0usize;
    for i in frames {
        if track.voiced[i] {
            best = best.max(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    best.max(run)
}

/// Contrast two or more segments per metric using local-z gaps.
///
/// Relations: `|dz| < similar_dz` -> `~`; `|dz| >= strong_dz` -> `>>`/`<<`;
/// otherwise `>`/`<`. Rankings order segments by descending local z.
pub fn compare_segments(
    utt: &AnalyzedUtterance,
    segments: &[(f64, f64)],
    metrics: &[MetricKind],
    global_refs: Option<&MetricRefMap>,
    thresholds: &BinThresholds,
) -> Result<SegmentComparison, AcousticError> {
    if segments.len() < 2 {
        return Err(AcousticError::NotEnoughSegments);
    }
    let observations: Vec<AcousticObservation> = segments
        .iter()
        .map(|&(t_s, t_e)| analyze_segment(utt, t_s, t_e, metrics, global_refs, thresholds))
        .collect::<Result<_, _>>()?;

    let mut per_metric = Vec::new();
    for &metric in metrics {
        let z: Vec<Option<f64>> = observations
            .iter()
            .map(|obs| {
                obs.metrics.iter().find(|m| m.metric == metric).map(|m| m.z_local)
            })
            .collect();
        let present: Vec<usize> =
            (0..z.len()).filter(|&i| z[i].is_some()).collect();
        if present.len() < 2 {
            continue;
        }
        let mut pairs = Vec::new();
        for (pi, &a) in present.iter().enumerate() {
            for &b in present.iter().skip(pi + 1) {
                let dz = z[a].unwrap() - z[b].unwrap();
                let relation = if dz.abs() < thresholds.similar_dz {
                    Relation::Similar
                } else if dz >= thresholds.strong_dz {
                    Relation::MuchGreater
                } else if dz > 0.0 {
                    Relation::Greater
                } else if dz <= -thresholds.strong_dz {
                    Relation::MuchLess
                } else {
                    Relation::Less
                };
                pairs.push(PairRelation { a, b, delta_z: dz, relation });
            }
        }
        let mut ranking = present.clone();
        ranking.sort_by(|&i, &j| {
            z[j].unwrap()
                .partial_cmp(&z[i].unwrap())
                .expect("finite z")
                .then(i.cmp(&j))
        });
        per_metric.push(MetricRelations { metric, pairs, ranking });
    }

    Ok(SegmentComparison { segments: segments.to_vec(), observations, per_metric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, amp: f64, dur_s: f64, sr: u32) -> Vec<f64> {
        let n = (dur_s * sr as f64) as usize;
        (0..n)
            .map(|i| {
                // Harmonic-rich pulse-ish wave so F0 tracking locks on.
                let t = i as f64 / sr as f64;
                let phase = (freq * t).fract();
                amp * (2.0 * phase - 1.0)
            })
            .collect()
    }

    fn sine(freq: f64, amp: f64, dur_s: f64, sr: u32) -> Vec<f64> {
        let n = (dur_s * sr as f64) as usize;
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    fn utterance(samples: Vec<f64>, sr: u32) -> AnalyzedUtterance {
        AnalyzedUtterance::analyze(AudioBuffer::new(samples, sr), &FrameParams::default())
            .unwrap()
    }

    fn word(w: &str, s: f64, e: f64) -> WordSpan {
        WordSpan { word: w.to_string(), start_s: s, end_s: e }
    }

    #[test]
    fn anchor_span_hull_and_padding() {
        let alignment = vec![
            word("a", 0.2, 0.5),
            word("b", 0.6, 0.8),
            word("c", 1.0, 1.2),
            word("d", 1.3, 1.5),
            word("e", 1.6, 1.9),
        ];
        let (t_s, t_e) = anchor_span(&alignment, &[2, 3, 4], 0.05, 5.0).unwrap();
        assert!((t_s - 0.95).abs() < 1e-12);
        assert!((t_e - 1.95).abs() < 1e-12);
    }

    #[test]
    fn anchor_span_clamps_to_zero() {
        let alignment = vec![word("a", 0.02, 0.3)];
        let (t_s, _) = anchor_span(&alignment, &[0], 0.075, 5.0).unwrap();
        assert_eq!(t_s, 0.0);
    }

    #[test]
    fn anchor_span_discontinuous_hull() {
        let alignment = vec![
            word("a", 0.0, 0.2),
            word("b", 0.3, 0.5),
            word("c", 0.6, 0.8),
            word("d", 0.9, 1.1),
            word("e", 1.2, 1.4),
            word("f", 1.5, 1.7),
        ];
        let (t_s, t_e) = anchor_span(&alignment, &[1, 5], 0.0, 5.0).unwrap();
        assert!((t_s - 0.3).abs() < 1e-12);
        assert!((t_e - 1.7).abs() < 1e-12);
    }

    #[test]
    fn anchor_span_index_out_of_range() {
        let alignment = vec![word("a", 0.0, 0.2)];
        assert!(matches!(
            anchor_span(&alignment, &[3], 0.0, 5.0),
            Err(AcousticError::IndexOutOfRange { index: 3, len: 1 })
        ));
    }

    #[test]
    fn zero_z_is_mid_and_boundaries_hold() {
        let th = BinThresholds::default();
        assert_eq!(level_bin(0.0, &th), LevelBin::Mid);
        assert_eq!(level_bin(-1.0, &th), LevelBin::Mid);
        assert_eq!(level_bin(1.0, &th), LevelBin::Mid);
        assert_eq!(level_bin(1.0 + 1e-12, &th), LevelBin::High);
        assert_eq!(level_bin(-1.0 - 1e-12, &th), LevelBin::Low);
        assert_eq!(level_bin(2.0, &th), LevelBin::High);
        assert_eq!(level_bin(-2.0, &th), LevelBin::Low);
    }

    #[test]
    fn z_global_formula() {
        // m = median + 2*IQR must give z_g = 2 (within the eps guard).
        let utt = utterance(sine(200.0, 0.4, 1.0, 16_000), 16_000);
        let mut refs = MetricRefMap::new();
        let obs_free = analyze_segment(
            &utt,
            0.1,
            0.9,
            &[MetricKind::Rms],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        let m = obs_free.metrics[0].value;
        refs.insert("rms".into(), RefStats { median: m - 1.0, iqr: 0.5 });
        let obs = analyze_segment(
            &utt,
            0.1,
            0.9,
            &[MetricKind::Rms],
            Some(&refs),
            &BinThresholds::default(),
        )
        .unwrap();
        let z = obs.metrics[0].z_global.unwrap();
        assert!((z - 2.0).abs() < 1e-6, "z_g = {z}");
        assert_eq!(obs.metrics[0].level, LevelBin::High);
        assert_eq!(obs.provenance.reference, "global+local");
    }

    #[test]
    fn missing_global_reference_falls_back_to_local() {
        let utt = utterance(sine(200.0, 0.4, 1.0, 16_000), 16_000);
        let obs = analyze_segment(
            &utt,
            0.1,
            0.9,
            &[MetricKind::Rms],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        assert_eq!(obs.provenance.reference, "local_only");
        assert!(obs
            .provenance
            .flags
            .iter()
            .any(|f| f == "missing_global_reference:rms"));
        assert!(obs.metrics[0].z_global.is_none());
    }

    #[test]
    fn z_local_of_full_utterance_median_is_zero() {
        // For a level metric, the whole-utterance segment summary equals the
        // local reference median, so z_l is 0.
        let utt = utterance(sine(220.0, 0.3, 1.0, 16_000), 16_000);
        let obs = analyze_segment(
            &utt,
            0.0,
            utt.duration_s(),
            &[MetricKind::Rms, MetricKind::F0Median],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        for m in &obs.metrics {
            assert!(m.z_local.abs() < 1e-9, "{:?} z_l = {}", m.metric, m.z_local);
        }
    }

    #[test]
    fn burst_segment_is_high_energy_with_spike() {
        // 2 s of quiet tone with a loud 200 ms burst at 1.2 s.
        let sr = 16_000u32;
        let mut samples = tone(180.0, 0.05, 2.0, sr);
        let b0 = (1.2 * sr as f64) as usize;
        let b1 = (1.4 * sr as f64) as usize;
        for (i, s) in samples.iter_mut().enumerate().take(b1).skip(b0) {
            let t = i as f64 / sr as f64;
            *s = 0.8 * (2.0 * (180.0 * t).fract() - 1.0);
        }
        let utt = utterance(samples, sr);
        let obs = analyze_segment(
            &utt,
            1.2,
            1.4,
            &[MetricKind::Rms, MetricKind::EnergyBurstiness],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        let rms = obs.metrics.iter().find(|m| m.metric == MetricKind::Rms).unwrap();
        assert_eq!(rms.level, LevelBin::High);
        assert!(obs.events.iter().any(|e| e == "sudden_spike"));
    }

    #[test]
    fn segment_too_short_and_out_of_bounds() {
        let utt = utterance(sine(200.0, 0.4, 1.0, 16_000), 16_000);
        assert!(matches!(
            analyze_segment(&utt, 0.1, 0.11, &[MetricKind::Rms], None, &BinThresholds::default()),
            Err(AcousticError::SegmentTooShort { .. })
        ));
        assert!(matches!(
            analyze_segment(&utt, 0.5, 3.0, &[MetricKind::Rms], None, &BinThresholds::default()),
            Err(AcousticError::SegmentOutOfBounds { .. })
        ));
    }

    #[test]
    fn hotspot_finds_embedded_burst() {
        let sr = 16_000u32;
        let mut samples = vec![0.0f64; (2.0 * sr as f64) as usize];
        let b0 = (0.9 * sr as f64) as usize;
        let b1 = (1.1 * sr as f64) as usize;
        for (i, s) in samples.iter_mut().enumerate().take(b1).skip(b0) {
            *s = 0.7 * (2.0 * PI * 500.0 * i as f64 / sr as f64).sin();
        }
        let utt = utterance(samples, sr);
        let out = find_hotspots(&utt, FocusType::EnergyBurst, 3, &BinThresholds::default());
        assert!(!out.rois.is_empty());
        let top = &out.rois[0];
        // Burst onset at 0.9 s must be inside the winner give or take one
        // analysis window.
        assert!(top.t_s <= 0.9 + HOTSPOT_WINDOW_S && top.t_e >= 0.9 - HOTSPOT_WINDOW_S);
    }

    #[test]
    fn constant_pitch_yields_no_excursion_rois() {
        let utt = utterance(tone(200.0, 0.4, 1.5, 16_000), 16_000);
        let out = find_hotspots(&utt, FocusType::PitchExcursion, 3, &BinThresholds::default());
        assert!(out.rois.is_empty());
        assert!(!out.no_voiced_frames);
    }

    #[test]
    fn unvoiced_audio_flags_pitch_scan() {
        let utt = utterance(vec![0.0; 16_000], 16_000);
        let out = find_hotspots(&utt, FocusType::PitchExcursion, 3, &BinThresholds::default());
        assert!(out.rois.is_empty());
        assert!(out.no_voiced_frames);
    }

    #[test]
    fn equal_bursts_tie_break_earlier_first() {
        let sr = 16_000u32;
        let mut samples = vec![0.0f64; (3.0 * sr as f64) as usize];
        for &burst_start in &[0.6, 1.8] {
            let b0 = (burst_start * sr as f64) as usize;
            let b1 = b0 + (0.15 * sr as f64) as usize;
            for (i, s) in samples.iter_mut().enumerate().take(b1).skip(b0) {
                *s = 0.7 * (2.0 * PI * 500.0 * (i - b0) as f64 / sr as f64).sin();
            }
        }
        let utt = utterance(samples, sr);
        let out = find_hotspots(&utt, FocusType::EnergyBurst, 2, &BinThresholds::default());
        assert_eq!(out.rois.len(), 2);
        assert!(out.rois[0].t_s < out.rois[1].t_s || out.rois[0].magnitude > out.rois[1].magnitude);
        let spans: Vec<f64> = out.rois.iter().map(|r| r.t_s).collect();
        assert!(spans.iter().any(|&s| (s - 0.6).abs() <= HOTSPOT_WINDOW_S));
        assert!(spans.iter().any(|&s| (s - 1.8).abs() <= HOTSPOT_WINDOW_S));
    }

    #[test]
    fn identical_segments_compare_similar() {
        let utt = utterance(tone(200.0, 0.4, 2.0, 16_000), 16_000);
        let cmp = compare_segments(
            &utt,
            &[(0.2, 0.8), (0.2, 0.8)],
            &[MetricKind::Rms, MetricKind::F0Median],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        for mr in &cmp.per_metric {
            for p in &mr.pairs {
                assert_eq!(p.relation, Relation::Similar);
                assert_eq!(p.delta_z, 0.0);
            }
        }
    }

    #[test]
    fn loud_vs_quiet_is_much_greater_on_rms() {
        // Mostly near-silent utterance with a short loud region, so the
        // local IQR is tiny and the z gap is large.
        let sr = 16_000u32;
        let mut samples = vec![0.0f64; (2.0 * sr as f64) as usize];
        let b0 = (0.5 * sr as f64) as usize;
        let b1 = (0.7 * sr as f64) as usize;
        for (i, s) in samples.iter_mut().enumerate().take(b1).skip(b0) {
            *s = 0.6 * (2.0 * PI * 400.0 * i as f64 / sr as f64).sin();
        }
        let utt = utterance(samples, sr);
        let cmp = compare_segments(
            &utt,
            &[(0.5, 0.7), (1.2, 1.4)],
            &[MetricKind::Rms],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        let rms = &cmp.per_metric[0];
        assert_eq!(rms.pairs[0].relation, Relation::MuchGreater);
        assert_eq!(rms.ranking, vec![0, 1]);
    }

    #[test]
    fn three_segment_ranking_is_consistent_with_pairs() {
        let sr = 16_000u32;
        let mut samples = vec![0.0f64; (3.0 * sr as f64) as usize];
        for (start, amp) in [(0.2, 0.2), (1.2, 0.5), (2.2, 0.8)] {
            let b0 = (start * sr as f64) as usize;
            let b1 = b0 + (0.3 * sr as f64) as usize;
            for (i, s) in samples.iter_mut().enumerate().take(b1).skip(b0) {
                *s = amp * (2.0 * PI * 300.0 * i as f64 / sr as f64).sin();
            }
        }
        let utt = utterance(samples, sr);
        let segs = [(0.2, 0.5), (1.2, 1.5), (2.2, 2.5)];
        let cmp = compare_segments(
            &utt,
            &segs,
            &[MetricKind::Rms],
            None,
            &BinThresholds::default(),
        )
        .unwrap();
        let rms = &cmp.per_metric[0];
        assert_eq!(rms.ranking, vec![2, 1, 0]);
        for p in &rms.pairs {
            let pos_a = rms.ranking.iter().position(|&i| i == p.a).unwrap();
            let pos_b = rms.ranking.iter().position(|&i| i == p.b).unwrap();
            match p.relation {
                Relation::Greater | Relation::MuchGreater => assert!(pos_a < pos_b),
                Relation::Less | Relation::MuchLess => assert!(pos_a > pos_b),
                Relation::Similar => {}
            }
        }
    }

    #[test]
    fn amplitude_scaling_preserves_f0_and_scales_rms() {
        let a = utterance(tone(170.0, 0.6, 1.0, 16_000), 16_000);
        let b = utterance(tone(170.0, 0.3, 1.0, 16_000), 16_000);
        let th = BinThresholds::default();
        let oa = analyze_segment(&a, 0.2, 0.8, &[MetricKind::F0Median, MetricKind::Rms], None, &th)
            .unwrap();
        let ob = analyze_segment(&b, 0.2, 0.8, &[MetricKind::F0Median, MetricKind::Rms], None, &th)
            .unwrap();
        let f0a = oa.metrics.iter().find(|m| m.metric == MetricKind::F0Median).unwrap();
        let f0b = ob.metrics.iter().find(|m| m.metric == MetricKind::F0Median).unwrap();
        assert!((f0a.value - f0b.value).abs() < 1e-6);
        let ra = oa.metrics.iter().find(|m| m.metric == MetricKind::Rms).unwrap();
        let rb = ob.metrics.iter().find(|m| m.metric == MetricKind::Rms).unwrap();
        assert!((ra.value - 2.0 * rb.value).abs() < 1e-9);
    }

    #[test]
    fn summaries_match_independent_recount() {
        // Straightforward second-path recomputation from the same track.
        let sr = 16_000u32;
        let mut samples = tone(210.0, 0.4, 1.5, sr);
        let g0 = (0.6 * sr as f64) as usize;
        let g1 = (0.9 * sr as f64) as usize;
        for s in samples.iter_mut().take(g1).skip(g0) {
            *s = 0.0;
        }
        let utt = utterance(samples, sr);
        let th = BinThresholds::default();
        let obs = analyze_segment(
            &utt,
            0.1,
            1.4,
            &[
                MetricKind::F0Median,
                MetricKind::Rms,
                MetricKind::VoicedRatio,
                MetricKind::PitchVelocity,
                MetricKind::EnergyBurstiness,
            ],
            None,
            &th,
        )
        .unwrap();
        let frames = utt.track.frames_in(0.1, 1.4);

        let by_kind = |k: MetricKind| obs.metrics.iter().find(|m| m.metric == k).unwrap().value;

        let mut f0s: Vec<f64> = frames
            .clone()
            .filter(|&i| utt.track.voiced[i])
            .map(|i| utt.track.f0[i])
            .collect();
        f0s.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let expected_f0 = if f0s.len() % 2 == 1 {
            f0s[f0s.len() / 2]
        } else {
            (f0s[f0s.len() / 2 - 1] + f0s[f0s.len() / 2]) / 2.0
        };
        assert!((by_kind(MetricKind::F0Median) - expected_f0).abs() < 1e-12);

        let voiced = frames.clone().filter(|&i| utt.track.voiced[i]).count();
        let expected_ratio = voiced as f64 / frames.len() as f64;
        assert!((by_kind(MetricKind::VoicedRatio) - expected_ratio).abs() < 1e-12);

        let des = utt.track.delta_e(frames.clone());
        let expected_burst = dsp::percentile(&des, 90.0).unwrap();
        assert!((by_kind(MetricKind::EnergyBurstiness) - expected_burst).abs() < 1e-12);
    }

    #[test]
    fn bucketing_is_monotone_in_raw_value() {
        // With fixed references, increasing the raw metric never lowers the bin.
        let refs = RefStats { median: 1.0, iqr: 0.5 };
        let th = BinThresholds::default();
        let order = |b: LevelBin| match b {
            LevelBin::Low => 0,
            LevelBin::Mid => 1,
            LevelBin::High => 2,
        };
        let mut prev = 0;
        for step in 0..200 {
            let m = -2.0 + step as f64 * 0.03;
            let bin = order(level_bin(robust_z(m, &refs), &th));
            assert!(bin >= prev);
            prev = bin;
        }
    }
}
