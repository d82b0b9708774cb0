//! Mono PCM audio buffers and WAV file I/O.

use std::path::Path;

use thiserror::Error;

/// In-memory mono audio, samples normalized to [-1, 1].
#[derive(Debug, Clone)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("unsupported format: {0} (need mono 16-bit PCM, 8-48 kHz)")]
    UnsupportedFormat(String),
    #[error("wav write failed: {0}")]
    Write(#[from] hound::Error),
}

/// Read a mono 16-bit PCM WAV file in the 8–48 kHz range.
pub fn read_wav(path: &Path) -> Result<AudioBuffer, AudioError> {
    let reader = hound::WavReader::open(path).map_err(|source| AudioError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!("{} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{:?} {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if !(8_000..=48_000).contains(&spec.sample_rate) {
        return Err(AudioError::UnsupportedFormat(format!("{} Hz", spec.sample_rate)));
    }
    let samples: Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples = samples.map_err(|source| AudioError::Open {
        path: path.display().to_string(),
        source,
    })?;
    Ok(AudioBuffer {
        samples: samples.into_iter().map(|s| s as f64 / 32768.0).collect(),
        sample_rate: spec.sample_rate,
    })
}

/// Write a buffer as mono 16-bit PCM WAV; samples are clamped to [-1, 1].
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let sr = 16_000;
        let samples: Vec<f64> = (0..sr)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / sr as f64).sin())
            .collect();
        write_wav(&path, &AudioBuffer::new(samples.clone(), sr as u32)).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, sr as u32);
        assert_eq!(back.samples.len(), samples.len());
        let max_err = samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1.0 / 32000.0, "quantization error too large: {max_err}");
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..100 {
            w.write_sample(0i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(AudioError::UnsupportedFormat(_))));
    }
}
