//! Synthetic room response. Up to the mixing time the reverberation is a set
//! of discrete reflections, each arriving from its own direction; after it, a
//! diffuse exponentially decaying noise tail reaching -60 dB at RT60. The
//! direct path is excluded; it is rendered by the head model.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::seed;

pub const EARLY_REFLECTIONS: usize = 24;
const EARLY_MIN_S: f64 = 0.002;
/// End of the discrete reflections and onset of the diffuse tail.
pub const MIXING_TIME_S: f64 = 0.05;

/// One discrete reflection, rendered through the head like a direct source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    /// Delay after the direct sound in seconds.
    pub delay: f64,
    pub gain: f64,
    /// Head-relative arrival direction in degrees.
    pub azimuth: f64,
}

/// Amplitude decay rate that gives -60 dB after `rt60` seconds.
fn decay_rate(rt60: f64) -> f64 {
    3.0 * std::f64::consts::LN_10 / rt60
}

/// Share of the reverberant energy arriving before the mixing time.
pub fn early_fraction(rt60: f64) -> f64 {
    if rt60 <= 0.0 {
        return 0.0;
    }
    let k = 2.0 * decay_rate(rt60);
    let e = |t: f64| (-k * t).exp();
    let t_end = rt60.max(MIXING_TIME_S);
    (e(EARLY_MIN_S) - e(MIXING_TIME_S)) / (e(EARLY_MIN_S) - e(t_end))
}

/// Discrete reflections with total energy `energy`, sorted by delay.
pub fn early_reflections(rt60: f64, energy: f64, seed: u64) -> Vec<Reflection> {
    if rt60 <= 0.0 || energy <= 0.0 {
        return Vec::new();
    }
    let mut rng = seed::rng(seed);
    let decay = decay_rate(rt60);
    let mut r: Vec<Reflection> = (0..EARLY_REFLECTIONS)
        .map(|_| {
            let delay = rng.random_range(EARLY_MIN_S..MIXING_TIME_S);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Reflection { delay, gain: sign * (-decay * delay).exp(), azimuth: rng.random_range(0.0..=180.0) }
        })
        .collect();
    r.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    let e: f64 = r.iter().map(|x| x.gain * x.gain).sum();
    let g = (energy / e).sqrt();
    r.iter_mut().for_each(|x| x.gain *= g);
    r
}

/// Diffuse tail from the mixing time on, with total energy `energy`.
pub fn reverb_tail(rt60: f64, energy: f64, sample_rate: f64, seed: u64) -> Vec<f64> {
    let len = (rt60 * sample_rate).ceil() as usize;
    let onset = (MIXING_TIME_S * sample_rate) as usize;
    if len <= onset || energy <= 0.0 {
        return Vec::new();
    }
    let mut rng = seed::rng(seed);
    let decay = decay_rate(rt60);
    let mut h = vec![0.0; len];
    for (n, v) in h.iter_mut().enumerate().skip(onset) {
        let w: f64 = StandardNormal.sample(&mut rng);
        *v = w * (-decay * n as f64 / sample_rate).exp();
    }
    let e: f64 = h.iter().map(|v| v * v).sum();
    let g = (energy / e).sqrt();
    h.iter_mut().for_each(|v| *v *= g);
    h
}
