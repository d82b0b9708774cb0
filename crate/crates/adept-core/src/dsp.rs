//! Frame-level signal analysis: windowed RMS energy, autocorrelation pitch
//! with a voicing decision, and the derived frame-delta sequences every
//! acoustic metric is built on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;

/// Analysis parameters. These are part of reference-table fingerprints:
/// changing them invalidates previously built global references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    pub window_s: f64,
    pub hop_s: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced decision.
    pub voicing_threshold: f64,
    /// Frames quieter than this RMS are unvoiced regardless of periodicity.
    pub silence_rms: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.010,
            f0_min_hz: 60.0,
            f0_max_hz: 400.0,
            voicing_threshold: 0.6,
            silence_rms: 1e-4,
        }
    }
}

/// Per-frame analysis results for one utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameTrack {
    pub params: FrameParams,
    pub sample_rate: u32,
    pub duration_s: f64,
    /// F0 in Hz; 0.0 when the frame is unvoiced.
    pub f0: Vec<f64>,
    /// Linear RMS energy per frame.
    pub rms: Vec<f64>,
    pub voiced: Vec<bool>,
    /// Autocorrelation peak strength per frame (0 when unvoiced).
    pub clarity: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio too short: {duration_s:.3}s < {required_s:.3}s")]
    TooShort { duration_s: f64, required_s: f64 },
}

impl FrameTrack {
    pub fn len(&self) -> usize {
        self.rms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rms.is_empty()
    }

    /// Center time of frame `i` in seconds.
    pub fn frame_time(&self, i: usize) -> f64 {
        i as f64 * self.params.hop_s + self.params.window_s / 2.0
    }

    /// Frame index range covering `[t_s, t_e]` (frames whose start lies in
    /// the interval, clamped to valid indices).
    pub fn frames_in(&self, t_s: f64, t_e: f64) -> std::ops::Range<usize> {
        let hop = self.params.hop_s;
        let lo = (t_s / hop).ceil().max(0.0) as usize;
        let hi_f = ((t_e - self.params.window_s) / hop).floor();
        let hi = if hi_f < 0.0 { 0 } else { hi_f as usize + 1 };
        let lo = lo.min(self.len());
        let hi = hi.clamp(lo, self.len());
        lo..hi
    }

    /// RMS delta per frame in the range: `rms[i] - rms[i-1]`. The delta at
    /// the range start uses the preceding utterance frame, so an event on
    /// the segment boundary is still attributed to the segment.
    pub fn delta_e(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        range
            .filter(|&i| i >= 1)
            .map(|i| self.rms[i] - self.rms[i - 1])
            .collect()
    }

    /// F0 delta per frame in the range over consecutive voiced pairs.
    pub fn delta_f0(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        range
            .filter(|&i| i >= 1 && self.voiced[i] && self.voiced[i - 1])
            .map(|i| self.f0[i] - self.f0[i - 1])
            .collect()
    }

    /// Voiced F0 values within a range.
    pub fn voiced_f0(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        range.filter(|&i| self.voiced[i]).map(|i| self.f0[i]).collect()
    }
}

/// Windowed analysis over the whole buffer.
///
/// Frame count follows `ceil((dur - win) / hop) + 1`; the final frame may
/// cover a truncated sample range. F0 search is restricted to
/// `[f0_min, f0_max]`; among near-equal autocorrelation peaks the smallest
/// lag wins, which suppresses subharmonic octave errors.
pub fn extract_frames(audio: &AudioBuffer, params: &FrameParams) -> Result<FrameTrack, DspError> {
    let duration_s = audio.duration_s();
    let required_s = 2.0 * params.window_s;
    if duration_s < required_s {
        return Err(DspError::TooShort { duration_s, required_s });
    }

    let sr = audio.sample_rate as f64;
    let win = (params.window_s * sr).round() as usize;
    let hop = (params.hop_s * sr).round() as usize;
    let n_frames = ((duration_s - params.window_s) / params.hop_s).ceil() as usize + 1;

    let lag_min = ((sr / params.f0_max_hz).floor() as usize).max(2);
    let lag_max = ((sr / params.f0_min_hz).ceil() as usize).min(win.saturating_sub(2));

    let mut f0 = Vec::with_capacity(n_frames);
    let mut rms = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    let mut clarity = Vec::with_capacity(n_frames);

    for i in 0..n_frames {
        let start = i * hop;
        let end = (start + win).min(audio.samples.len());
        let frame = &audio.samples[start.min(audio.samples.len())..end];
        if frame.is_empty() {
            f0.push(0.0);
            rms.push(0.0);
            voiced.push(false);
            clarity.push(0.0);
            continue;
        }

        let energy: f64 = frame.iter().map(|x| x * x).sum();
        let frame_rms = (energy / frame.len() as f64).sqrt();
        rms.push(frame_rms);

        if frame_rms < params.silence_rms || lag_max <= lag_min || frame.len() <= lag_min + 2 {
            f0.push(0.0);
            voiced.push(false);
            clarity.push(0.0);
            continue;
        }

        let (best_lag, best_r) = pitch_lag(frame, lag_min, lag_max.min(frame.len() - 2));
        if best_r >= params.voicing_threshold {
            f0.push(sr / best_lag);
            voiced.push(true);
            clarity.push(best_r);
        } else {
            f0.push(0.0);
            voiced.push(false);
            clarity.push(0.0);
        }
    }

    Ok(FrameTrack {
        params: *params,
        sample_rate: audio.sample_rate,
        duration_s,
        f0,
        rms,
        voiced,
        clarity,
    })
}

/// Normalized autocorrelation at one lag.
fn norm_autocorr(frame: &[f64], lag: usize) -> f64 {
    let n = frame.len() - lag;
    if n == 0 {
        return 0.0;
    }
    let mut cross = 0.0;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for t in 0..n {
        cross += frame[t] * frame[t + lag];
        e0 += frame[t] * frame[t];
        e1 += frame[t + lag] * frame[t + lag];
    }
    let denom = (e0 * e1).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        cross / denom
    }
}

/// Search the lag range for the pitch period. Returns `(lag, strength)` with
/// sub-sample lag refinement by parabolic interpolation. Among local maxima
/// within 2% of the strongest, the smallest lag (highest frequency) wins.
fn pitch_lag(frame: &[f64], lag_min: usize, lag_max: usize) -> (f64, f64) {
    let r: Vec<f64> = (lag_min..=lag_max).map(|l| norm_autocorr(frame, l)).collect();
    // Local maxima (plateau-tolerant at edges).
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for i in 0..r.len() {
        let left = if i == 0 { f64::NEG_INFINITY } else { r[i - 1] };
        let right = if i + 1 == r.len() { f64::NEG_INFINITY } else { r[i + 1] };
        if r[i] >= left && r[i] > right {
            peaks.push((i, r[i]));
        }
    }
    let Some(&(_, best)) = peaks.iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()) else {
        return (lag_min as f64, 0.0);
    };
    let chosen = peaks
        .iter()
        .filter(|&&(_, v)| v >= best - 0.02)
        .min_by_key(|&&(i, _)| i)
        .copied()
        .expect("non-empty peak list");

    let (i, v) = chosen;
    let lag = (lag_min + i) as f64;
    // Parabolic refinement around the peak when neighbors exist.
    let refined = if i > 0 && i + 1 < r.len() {
        let (ym1, y0, yp1) = (r[i - 1], r[i], r[i + 1]);
        let denom = ym1 - 2.0 * y0 + yp1;
        if denom.abs() > 1e-12 {
            lag + 0.5 * (ym1 - yp1) / denom
        } else {
            lag
        }
    } else {
        lag
    };
    (refined, v)
}

/// Percentile with linear interpolation over a copy of the input.
/// `p` in [0, 100]. Empty input yields `None`.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        Some(v[lo])
    } else {
        let frac = rank - lo as f64;
        Some(v[lo] * (1.0 - frac) + v[hi] * frac)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 50.0)
}

/// Interquartile range: p75 - p25.
pub fn iqr(values: &[f64]) -> Option<f64> {
    Some(percentile(values, 75.0)? - percentile(values, 25.0)?)
}
