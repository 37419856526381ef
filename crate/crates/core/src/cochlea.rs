//! Cochlear front end: an ERB-spaced gammatone filterbank followed by
//! phase-locked spike generation.
//!
//! Each channel is a 4th-order gammatone realized as a cascade of four
//! second-order sections obtained from the impulse-invariant transform of
//! the Patterson–Holdsworth filter (Slaney's formulation). The cascade is
//! normalized to unit gain at its center frequency.
//!
//! Spikes mark the maximum of every positive half-wave: one spike per
//! positive lobe, carrying the waveform value at that maximum.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::MonoSignal;

/// Glasberg & Moore (1990) ERB-rate in Cams.
pub fn erb_rate(f_hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f_hz).log10()
}

/// Inverse of [`erb_rate`].
pub fn erb_rate_to_hz(cams: f64) -> f64 {
    (10f64.powf(cams / 21.4) - 1.0) / 0.00437
}

/// Equivalent rectangular bandwidth at `f_hz`.
pub fn erb_bandwidth(f_hz: f64) -> f64 {
    24.7 * (4.37e-3 * f_hz + 1.0)
}

pub const DEFAULT_CHANNELS: usize = 20;
pub const DEFAULT_F_LOW: f64 = 200.0;
pub const DEFAULT_F_HIGH: f64 = 4000.0;
/// Spike noise floor in full-scale units.
pub const DEFAULT_SPIKE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterbankSpec {
    pub f_low: f64,
    pub f_high: f64,
    pub sample_rate: f64,
    /// Strictly increasing channel center frequencies.
    pub centers: Vec<f64>,
}

impl FilterbankSpec {
    pub fn channel_count(&self) -> usize {
        self.centers.len()
    }
}

/// ERB-rate spaced centers spanning `[f_low, f_high]`, both endpoints included.
/// A single channel sits at `f_low`.
pub fn design_filterbank(channels: usize, f_low: f64, f_high: f64, sample_rate: f64) -> Result<FilterbankSpec> {
    if channels == 0 {
        return Err(invalid("filterbank needs at least one channel"));
    }
    if !(f_low > 0.0 && f_low < f_high) {
        return Err(invalid(format!("need 0 < f_low < f_high, got {f_low}, {f_high}")));
    }
    if f_high >= sample_rate / 2.0 {
        return Err(invalid(format!("f_high {f_high} Hz is not below Nyquist ({} Hz)", sample_rate / 2.0)));
    }
    let (lo, hi) = (erb_rate(f_low), erb_rate(f_high));
    let centers = (0..channels)
        .map(|i| match i {
            0 => f_low,
            i if i == channels - 1 => f_high,
            i => erb_rate_to_hz(lo + (hi - lo) * i as f64 / (channels - 1) as f64),
        })
        .collect();
    Ok(FilterbankSpec { f_low, f_high, sample_rate, centers })
}

/// One second-order section, direct form I.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z_inv * z_inv;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z_inv * z_inv;
        num / den
    }

    fn run(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.reserve(x.len());
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for &xn in x {
            let yn = self.b[0] * xn + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = xn;
            y2 = y1;
            y1 = yn;
            y.push(yn);
        }
    }
}

/// Coefficients of the four-section gammatone cascade centered at `cf`.
fn gammatone_sections(cf: f64, sample_rate: f64) -> [Biquad; 4] {
    let t = 1.0 / sample_rate;
    let b = 1.019 * 2.0 * PI * erb_bandwidth(cf);
    let (c, s) = ((2.0 * PI * cf * t).cos(), (2.0 * PI * cf * t).sin());
    let e = (b * t).exp();
    let r_plus = (3.0 + 2f64.powf(1.5)).sqrt();
    let r_minus = (3.0 - 2f64.powf(1.5)).sqrt();
    let a1 = [
        -(2.0 * t * c / e + 2.0 * r_plus * t * s / e) / 2.0,
        -(2.0 * t * c / e - 2.0 * r_plus * t * s / e) / 2.0,
        -(2.0 * t * c / e + 2.0 * r_minus * t * s / e) / 2.0,
        -(2.0 * t * c / e - 2.0 * r_minus * t * s / e) / 2.0,
    ];
    let den = [-2.0 * c / e, (-2.0 * b * t).exp()];
    let mut sections = a1.map(|a| Biquad { b: [t, a, 0.0], a: den });

    // normalize the cascade to unit gain at the center frequency
    let z_inv = Complex::from_polar(1.0, -2.0 * PI * cf * t);
    let gain: f64 = sections.iter().map(|sec| sec.response(z_inv).norm()).product();
    let per_section = gain.powf(0.25);
    for sec in &mut sections {
        for coef in &mut sec.b {
            *coef /= per_section;
        }
    }
    sections
}

/// Magnitude response of channel `channel` at `f_hz`.
pub fn channel_gain(spec: &FilterbankSpec, channel: usize, f_hz: f64) -> f64 {
    let z_inv = Complex::from_polar(1.0, -2.0 * PI * f_hz / spec.sample_rate);
    gammatone_sections(spec.centers[channel], spec.sample_rate)
        .iter()
        .map(|s| s.response(z_inv).norm())
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWave {
    pub channel: usize,
    pub center_hz: f64,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

/// Decompose `signal` into one band-passed wave per filterbank channel.
pub fn filter_signal(signal: &MonoSignal, spec: &FilterbankSpec) -> Result<Vec<ChannelWave>> {
    if signal.is_empty() {
        return Err(invalid("cannot filter an empty signal"));
    }
    if (signal.sample_rate - spec.sample_rate).abs() > 1e-9 {
        return Err(Error::SampleRateMismatch { expected: spec.sample_rate, actual: signal.sample_rate });
    }
    Ok(spec
        .centers
        .iter()
        .enumerate()
        .map(|(i, &cf)| {
            let mut a = signal.samples.clone();
            let mut b = Vec::with_capacity(a.len());
            for section in gammatone_sections(cf, spec.sample_rate) {
                section.run(&a, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            ChannelWave { channel: i, center_hz: cf, sample_rate: spec.sample_rate, samples: a }
        })
        .collect())
}

/// Phase-locked spikes of one channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    pub channel: usize,
    /// Strictly increasing sample indices.
    pub times: Vec<usize>,
    /// Waveform value at each spike, always positive.
    pub amplitudes: Vec<f64>,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spikes with `start <= t < end`, times kept absolute.
    pub fn window(&self, start: usize, end: usize) -> SpikeTrain {
        let lo = self.times.partition_point(|&t| t < start);
        let hi = self.times.partition_point(|&t| t < end);
        SpikeTrain {
            channel: self.channel,
            times: self.times[lo..hi].to_vec(),
            amplitudes: self.amplitudes[lo..hi].to_vec(),
        }
    }
}

/// Emit one spike at the maximum of every positive lobe whose peak reaches
/// `noise_floor`. Ties inside a lobe resolve to the earliest sample.
pub fn encode_spikes_with_floor(channel: &ChannelWave, noise_floor: f64) -> SpikeTrain {
    let mut train = SpikeTrain { channel: channel.channel, ..Default::default() };
    let mut peak: Option<(usize, f64)> = None;
    let flush = |peak: &mut Option<(usize, f64)>, train: &mut SpikeTrain| {
        if let Some((t, a)) = peak.take() {
            if a >= noise_floor {
                train.times.push(t);
                train.amplitudes.push(a);
            }
        }
    };
    for (n, &v) in channel.samples.iter().enumerate() {
        if v > 0.0 {
            match peak {
                Some((_, a)) if a >= v => {}
                _ => peak = Some((n, v)),
            }
        } else {
            flush(&mut peak, &mut train);
        }
    }
    flush(&mut peak, &mut train);
    train
}

pub fn encode_spikes(channel: &ChannelWave) -> SpikeTrain {
    encode_spikes_with_floor(channel, DEFAULT_SPIKE_FLOOR)
}

/// Filter and spike-encode a signal in one pass.
pub fn spike_trains(signal: &MonoSignal, spec: &FilterbankSpec, noise_floor: f64) -> Result<Vec<SpikeTrain>> {
    Ok(filter_signal(signal, spec)?.iter().map(|w| encode_spikes_with_floor(w, noise_floor)).collect())
}
