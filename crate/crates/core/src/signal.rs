//! Sampled waveforms and WAV ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{invalid, Error, Result};

/// Internal processing rate. Corpus audio is resampled to this on load.
pub const SAMPLE_RATE: f64 = 48_000.0;

/// Single-channel waveform, full scale normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl MonoSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: f64) -> Self {
        Self { samples: vec![0.0; len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean square amplitude.
    pub fn power(&self) -> f64 {
        dsp::power(&self.samples)
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    /// Copy of `[start, start + len)`, zero-padded past the end.
    pub fn slice_padded(&self, start: usize, len: usize) -> MonoSignal {
        let mut out = vec![0.0; len];
        if start < self.samples.len() {
            let end = (start + len).min(self.samples.len());
            out[..end - start].copy_from_slice(&self.samples[start..end]);
        }
        MonoSignal { samples: out, sample_rate: self.sample_rate }
    }

    /// Band-limited conversion to `target_rate`.
    pub fn resampled(&self, target_rate: f64) -> MonoSignal {
        if (self.sample_rate - target_rate).abs() < 1e-9 {
            return self.clone();
        }
        MonoSignal {
            samples: dsp::resample(&self.samples, self.sample_rate, target_rate),
            sample_rate: target_rate,
        }
    }
}

/// The two-microphone recording of a binaural head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoSignal {
    pub left: MonoSignal,
    pub right: MonoSignal,
}

impl StereoSignal {
    pub fn new(left: MonoSignal, right: MonoSignal) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch(format!(
                "stereo channels differ in length: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        if left.sample_rate != right.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: left.sample_rate,
                actual: right.sample_rate,
            });
        }
        Ok(Self { left, right })
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.left.sample_rate
    }

    pub fn slice_padded(&self, start: usize, len: usize) -> StereoSignal {
        StereoSignal {
            left: self.left.slice_padded(start, len),
            right: self.right.slice_padded(start, len),
        }
    }

    pub fn swapped(&self) -> StereoSignal {
        StereoSignal { left: self.right.clone(), right: self.left.clone() }
    }
}

/// Decoded WAV payload, resampled to [`SAMPLE_RATE`].
pub enum WavContent {
    Mono(MonoSignal),
    Stereo(StereoSignal),
}

/// Read a 16-bit PCM mono or stereo WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WavContent> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(invalid(format!(
            "{}: only 16-bit PCM is supported (got {} bits, {:?})",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let raw: Vec<i16> = reader.samples::<i16>().collect::<std::result::Result<_, _>>()?;
    let rate = spec.sample_rate as f64;
    let to_f = |s: i16| s as f64 / 32768.0;
    match spec.channels {
        1 => {
            let mono = MonoSignal::new(raw.into_iter().map(to_f).collect(), rate)?;
            Ok(WavContent::Mono(mono.resampled(SAMPLE_RATE)))
        }
        2 => {
            let left: Vec<f64> = raw.iter().step_by(2).map(|&s| to_f(s)).collect();
            let right: Vec<f64> = raw.iter().skip(1).step_by(2).map(|&s| to_f(s)).collect();
            let stereo = StereoSignal::new(MonoSignal::new(left, rate)?, MonoSignal::new(right, rate)?)?;
            Ok(WavContent::Stereo(StereoSignal {
                left: stereo.left.resampled(SAMPLE_RATE),
                right: stereo.right.resampled(SAMPLE_RATE),
            }))
        }
        n => Err(invalid(format!("{}: unsupported channel count {n}", path.display()))),
    }
}

/// Read a WAV file as mono, averaging channels of stereo input.
pub fn read_wav_mono(path: impl AsRef<Path>) -> Result<MonoSignal> {
    Ok(match read_wav(path)? {
        WavContent::Mono(m) => m,
        WavContent::Stereo(s) => MonoSignal {
            samples: s.left.samples.iter().zip(&s.right.samples).map(|(l, r)| 0.5 * (l + r)).collect(),
            sample_rate: s.left.sample_rate,
        },
    })
}

fn quantize(x: f64) -> i16 {
    (x * 32767.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav_mono(path: impl AsRef<Path>, signal: &MonoSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate.round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &signal.samples {
        writer.write_sample(quantize(s))?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn write_wav_stereo(path: impl AsRef<Path>, signal: &StereoSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: signal.sample_rate().round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for (&l, &r) in signal.left.samples.iter().zip(&signal.right.samples) {
        writer.write_sample(quantize(l))?;
        writer.write_sample(quantize(r))?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rate_and_nan() {
        assert!(MonoSignal::new(vec![0.0], 0.0).is_err());
        assert!(MonoSignal::new(vec![f64::NAN], 48000.0).is_err());
    }

    #[test]
    fn stereo_requires_equal_lengths() {
        let a = MonoSignal::silence(10, 48000.0);
        let b = MonoSignal::silence(11, 48000.0);
        assert!(StereoSignal::new(a, b).is_err());
    }

    #[test]
    fn wav_round_trip_with_resampling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let fs = 16_000.0;
        let tone: Vec<f64> =
            (0..16_000).map(|n| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / fs).sin()).collect();
        write_wav_mono(&path, &MonoSignal::new(tone, fs).unwrap()).unwrap();
        let back = read_wav_mono(&path).unwrap();
        assert_eq!(back.sample_rate, SAMPLE_RATE);
        assert_eq!(back.len(), 48_000);
        // interior samples follow the upsampled tone
        for n in 1000..1100 {
            let want = 0.5 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / SAMPLE_RATE).sin();
            assert!((back.samples[n] - want).abs() < 2e-3, "sample {n}");
        }
    }

    #[test]
    fn missing_wav_is_reported() {
        assert!(matches!(read_wav("/nonexistent/x.wav"), Err(Error::MissingInput(_))));
    }
}
