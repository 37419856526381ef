//! Parametric binaural simulator: spherical-head ITD and shadowing, a pinna
//! gain lobe, a synthetic room and near-field ego noise.
//!
//! Azimuths are head-relative degrees in `[0, 180]`: 0 is the right side,
//! 90 straight ahead, 180 the left side.

pub mod noise;
pub mod room;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, RealSpectrum};
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::signal::{MonoSignal, StereoSignal};

pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadModel {
    /// Interaural distance `d` in m; the head radius is `d / 2`.
    pub interaural_distance: f64,
    /// Peak pinna gain in dB (0 disables the pinna).
    pub pinna_gain_db: f64,
    /// Lobe center, degrees from the median plane towards the ear's side.
    pub pinna_center_deg: f64,
    /// Lobe standard deviation in degrees.
    pub pinna_width_deg: f64,
    /// The pinna only acts above this frequency.
    pub pinna_cutoff_hz: f64,
    /// Contralateral attenuation at `shadow_f_high` for a fully lateral source.
    pub shadow_max_db: f64,
    pub shadow_f_low: f64,
    pub shadow_f_high: f64,
    /// Near-field fan noise at the scene's SNR.
    pub ego_noise: bool,
}

impl Default for HeadModel {
    fn default() -> Self {
        Self {
            interaural_distance: 0.145,
            pinna_gain_db: 6.0,
            pinna_center_deg: 45.0,
            pinna_width_deg: 30.0,
            pinna_cutoff_hz: 2000.0,
            shadow_max_db: 20.0,
            shadow_f_low: 200.0,
            shadow_f_high: 4000.0,
            ego_noise: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ear {
    Left,
    Right,
}

impl Ear {
    pub fn other(self) -> Self {
        match self {
            Ear::Left => Ear::Right,
            Ear::Right => Ear::Left,
        }
    }
}

impl HeadModel {
    pub fn radius(&self) -> f64 {
        self.interaural_distance / 2.0
    }

    /// Woodworth interaural delay in seconds for a source `lateral` radians
    /// off the median plane.
    pub fn woodworth_itd(&self, lateral: f64) -> f64 {
        let t = lateral.abs();
        self.radius() / SPEED_OF_SOUND * (t.sin() + t)
    }

    /// Largest interaural delay the head can produce (fully lateral source).
    pub fn max_itd(&self) -> f64 {
        self.woodworth_itd(PI / 2.0)
    }

    /// Degrees from the median plane towards `ear`'s side.
    fn ear_angle(azimuth: f64, ear: Ear) -> f64 {
        match ear {
            Ear::Right => 90.0 - azimuth,
            Ear::Left => azimuth - 90.0,
        }
    }

    /// Pinna gain in dB at `ear` for a source at `azimuth`, above the cutoff.
    pub fn pinna_db(&self, azimuth: f64, ear: Ear) -> f64 {
        let x = (Self::ear_angle(azimuth, ear) - self.pinna_center_deg) / self.pinna_width_deg;
        self.pinna_gain_db * (-0.5 * x * x).exp()
    }

    /// Head-shadow attenuation in dB at `ear` for frequency `f`.
    pub fn shadow_db(&self, azimuth: f64, ear: Ear, f: f64) -> f64 {
        let phi = Self::ear_angle(azimuth, ear);
        if phi >= 0.0 || f <= self.shadow_f_low {
            return 0.0;
        }
        let ramp = ((f / self.shadow_f_low).ln() / (self.shadow_f_high / self.shadow_f_low).ln()).min(1.0);
        self.shadow_max_db * phi.to_radians().sin().abs() * ramp
    }

    /// Complex response of the direct path to `ear`.
    pub fn response(&self, azimuth: f64, ear: Ear, f: f64) -> Complex<f64> {
        let phi = Self::ear_angle(azimuth, ear);
        let mut db = -self.shadow_db(azimuth, ear, f);
        if f >= self.pinna_cutoff_hz {
            db += self.pinna_db(azimuth, ear);
        }
        let gain = 10f64.powf(db / 20.0);
        let delay = if phi < 0.0 { self.woodworth_itd(phi.to_radians()) } else { 0.0 };
        Complex::from_polar(gain, -2.0 * PI * f * delay)
    }

    /// Add `gain * response(azimuth, ear, f) * exp(-2 pi i f delay)` to
    /// `out[k]` at `f = k df`; equal to evaluating `response` bin by bin.
    pub fn accumulate_response(&self, azimuth: f64, ear: Ear, gain: f64, delay: f64, df: f64, out: &mut [Complex<f64>]) {
        const ANCHOR: usize = 1024;
        let phi = Self::ear_angle(azimuth, ear);
        let (shadow, itd) =
            if phi < 0.0 { (self.shadow_max_db * phi.to_radians().sin().abs(), self.woodworth_itd(phi.to_radians())) } else { (0.0, 0.0) };
        let pinna = self.pinna_db(azimuth, ear);
        let tau = delay + itd;
        let step = Complex::from_polar(1.0, -2.0 * PI * df * tau);
        let span = (self.shadow_f_high / self.shadow_f_low).ln();
        let mut ph = Complex::new(1.0, 0.0);
        // the gain is constant outside the shadow ramp; skip recomputing it there
        let mut last = (f64::NAN, 0.0);
        for (k, o) in out.iter_mut().enumerate() {
            let f = k as f64 * df;
            if k % ANCHOR == 0 {
                ph = Complex::from_polar(1.0, -2.0 * PI * f * tau);
            }
            let ramp = if f <= self.shadow_f_low {
                0.0
            } else if f >= self.shadow_f_high {
                1.0
            } else {
                (f / self.shadow_f_low).ln() / span
            };
            let db = if f >= self.pinna_cutoff_hz { pinna } else { 0.0 } - shadow * ramp;
            if db != last.0 {
                last = (db, gain * 10f64.powf(db / 20.0));
            }
            *o += ph * last.1;
            ph *= step;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.pinna_gain_db,
            self.pinna_center_deg,
            self.shadow_max_db,
            self.shadow_f_low,
            self.shadow_f_high,
            self.pinna_cutoff_hz,
        ];
        if !(self.interaural_distance > 0.0) || finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("head model needs d > 0 and finite gains"));
        }
        if !(self.pinna_width_deg > 0.0) || !(self.shadow_f_low > 0.0 && self.shadow_f_low < self.shadow_f_high) {
            return Err(invalid("head model needs a positive pinna width and f_low < f_high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    /// Head-relative source azimuth in degrees.
    pub azimuth: f64,
    pub distance: f64,
    /// Reverberation time in s; 0 renders an anechoic scene.
    pub rt60: f64,
    /// Direct-to-reverberant energy ratio in dB.
    pub drr_db: f64,
    /// Ego-noise level relative to the source, in dB SNR.
    pub snr_db: f64,
    /// Independent reverberation at the two ears (a diffuse field). When
    /// false both ears share one response, which keeps the scene exactly
    /// mirror-symmetric.
    pub decorrelated_reverb: bool,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            azimuth: 90.0,
            distance: 1.6,
            rt60: 0.3,
            drr_db: 6.0,
            snr_db: 20.0,
            decorrelated_reverb: true,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn anechoic(azimuth: f64) -> Self {
        Self { azimuth, rt60: 0.0, ..Self::default() }
    }
}

/// Noise-free and noisy renderings of the same scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub clean: StereoSignal,
    pub noisy: StereoSignal,
}

/// Render `dry` through the head and room; noise is added when the head's
/// ego noise is on. Output has the length of `dry`.
pub fn render(dry: &MonoSignal, scene: &SceneSpec, head: &HeadModel) -> Result<Rendering> {
    head.validate()?;
    if dry.is_empty() {
        return Err(invalid("cannot render an empty signal"));
    }
    if !(0.0..=180.0).contains(&scene.azimuth) {
        return Err(invalid(format!("azimuth {} deg is outside [0, 180]", scene.azimuth)));
    }
    if scene.rt60 < 0.0 || !scene.rt60.is_finite() {
        return Err(invalid(format!("rt60 must be non-negative, got {}", scene.rt60)));
    }
    let fs = dry.sample_rate;
    let n = dry.len();
    let reverb_energy = if scene.rt60 > 0.0 { 10f64.powf(-scene.drr_db / 10.0) } else { 0.0 };
    let early_energy = reverb_energy * room::early_fraction(scene.rt60);
    let reflections = room::early_reflections(scene.rt60, early_energy, seed::derive(scene.seed, "reflections", 0));
    let tail = |label: &str| {
        room::reverb_tail(scene.rt60, reverb_energy - early_energy, fs, seed::derive(scene.seed, label, 0))
    };
    let (tail_l, tail_r) = if scene.decorrelated_reverb {
        (tail("reverb-left"), tail("reverb-right"))
    } else {
        let t = tail("reverb");
        (t.clone(), t)
    };
    let pad = (head.max_itd() * fs).ceil() as usize
        + ((room::MIXING_TIME_S * fs) as usize).max(tail_l.len().max(tail_r.len()))
        + 64;
    let spec = RealSpectrum::new(&dry.samples, n + pad, fs);
    let ear = |e: Ear, tail: &[f64]| -> Vec<f64> {
        let mut h = if tail.is_empty() { vec![Complex::new(0.0, 0.0); spec.bins()] } else { spec.spectrum_of(tail) };
        h.truncate(spec.bins());
        let df = spec.bin_width();
        head.accumulate_response(scene.azimuth, e, 1.0, 0.0, df, &mut h);
        for r in &reflections {
            // the room is left-right symmetric: mirrored sources get mirrored
            // reflections, i.e. each reflection reaches the other ear
            let e = if scene.azimuth > 90.0 { e.other() } else { e };
            head.accumulate_response(r.azimuth, e, r.gain, r.delay, df, &mut h);
        }
        spec.filtered(n, |k, _| h[k])
    };
    let clean = StereoSignal {
        left: MonoSignal { samples: ear(Ear::Left, &tail_l), sample_rate: fs },
        right: MonoSignal { samples: ear(Ear::Right, &tail_r), sample_rate: fs },
    };
    let mut noisy = clean.clone();
    if head.ego_noise {
        // the fan is as loud at both ears whatever the source direction
        let level = dry.power() * (1.0 + reverb_energy) / 10f64.powf(scene.snr_db / 10.0);
        for (sig, label) in [(&mut noisy.left, "noise-left"), (&mut noisy.right, "noise-right")] {
            let noise = noise::pink(n, level, seed::derive(scene.seed, label, 0));
            sig.samples.iter_mut().zip(noise).for_each(|(s, v)| *s += v);
        }
    }
    Ok(Rendering { clean, noisy })
}

/// Binaural recording of `dry` played at the scene's azimuth.
pub fn synthesize_binaural(dry: &MonoSignal, scene: &SceneSpec, head: &HeadModel) -> Result<StereoSignal> {
    Ok(render(dry, scene, head)?.noisy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Downmix {
    #[serde(rename = "LCh")]
    Left,
    #[serde(rename = "RCh")]
    Right,
    #[serde(rename = "LRCh")]
    Average,
}

impl Downmix {
    pub const ALL: [Downmix; 3] = [Downmix::Left, Downmix::Right, Downmix::Average];
}

impl fmt::Display for Downmix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Downmix::Left => "LCh",
            Downmix::Right => "RCh",
            Downmix::Average => "LRCh",
        })
    }
}

impl FromStr for Downmix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lch" | "left" => Ok(Downmix::Left),
            "rch" | "right" => Ok(Downmix::Right),
            "lrch" | "average" | "mean" => Ok(Downmix::Average),
            _ => Err(invalid(format!("unknown downmix mode {s:?} (expected LCh, RCh or LRCh)"))),
        }
    }
}

pub fn downmix(s: &StereoSignal, mode: Downmix) -> MonoSignal {
    match mode {
        Downmix::Left => s.left.clone(),
        Downmix::Right => s.right.clone(),
        Downmix::Average => MonoSignal {
            samples: s.left.samples.iter().zip(&s.right.samples).map(|(l, r)| 0.5 * (l + r)).collect(),
            sample_rate: s.sample_rate(),
        },
    }
}

/// Reports print SNRs above this as the cap.
pub const SNR_CAP_DB: f64 = 120.0;

/// `10 log10(P_clean / P_residual)`; `+inf` when the residual is zero.
pub fn measure_snr(clean: &MonoSignal, noisy: &MonoSignal) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::DimensionMismatch(format!("clean has {} samples, noisy {}", clean.len(), noisy.len())));
    }
    let p = clean.power();
    if p == 0.0 {
        return Err(invalid("clean signal has zero power"));
    }
    let residual: Vec<f64> = noisy.samples.iter().zip(&clean.samples).map(|(y, x)| y - x).collect();
    Ok(10.0 * (p / dsp::power(&residual)).log10())
}

/// SNR restricted to `[lo, hi]` Hz.
pub fn measure_band_snr(clean: &MonoSignal, noisy: &MonoSignal, lo: f64, hi: f64) -> Result<f64> {
    let fs = clean.sample_rate;
    let band = |s: &MonoSignal| MonoSignal { samples: dsp::band_limit(&s.samples, fs, lo, hi), sample_rate: fs };
    measure_snr(&band(clean), &band(noisy))
}

/// Concatenate utterances after rotating the list right by `2 * rotation`.
pub fn build_compound(utterances: &[MonoSignal], rotation: usize) -> Result<MonoSignal> {
    let first = utterances.first().ok_or_else(|| invalid("no utterances to build a compound from"))?;
    let fs = first.sample_rate;
    if let Some(u) = utterances.iter().find(|u| u.sample_rate != fs) {
        return Err(Error::SampleRateMismatch { expected: fs, actual: u.sample_rate });
    }
    let n = utterances.len();
    let shift = (2 * rotation) % n;
    let mut samples = Vec::with_capacity(utterances.iter().map(MonoSignal::len).sum());
    for k in 0..n {
        samples.extend_from_slice(&utterances[(k + n - shift) % n].samples);
    }
    Ok(MonoSignal { samples, sample_rate: fs })
}
