//! Cascade formant synthesizer turning phoneme strings into speech-like
//! waveforms: a glottal pulse train with declining pitch through five
//! time-varying resonators, plus band-limited noise for obstruents.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::asr::lexicon::{tokenize, Lexicon};
use crate::asr::phoneme::{Class, Phoneme};
use crate::error::{invalid, Result};
use crate::seed;
use crate::signal::MonoSignal;

/// RMS of synthesized speech over its voiced parts, about -23 dBFS.
pub const SPEECH_RMS: f64 = 0.07;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    /// Mean fundamental frequency in Hz.
    pub f0: f64,
    /// Vocal-tract scaling of all formants (1 for an adult male).
    pub formant_scale: f64,
    /// Duration multiplier; above 1 is slower.
    pub tempo: f64,
    pub seed: u64,
}

impl Voice {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 40.0 && self.f0 < 500.0) || !(self.formant_scale > 0.5 && self.formant_scale < 2.0) || !(self.tempo > 0.2)
        {
            return Err(invalid(format!("implausible voice {self:?}")));
        }
        Ok(())
    }
}

/// Upper formants, fixed per voice up to scaling.
const F4: f64 = 3500.0;
const F5: f64 = 4200.0;
const BANDWIDTHS: [f64; 5] = [90.0, 110.0, 170.0, 250.0, 300.0];
/// Coefficient update interval for the time-varying resonators.
const BLOCK: usize = 48;

#[derive(Debug, Clone, Copy)]
struct Segment {
    len: usize,
    formants: [f64; 3],
    voicing: f64,
    /// Frication amplitude and its band.
    noise: f64,
    band: (f64, f64),
}

fn segment(p: Phoneme, fs: f64, tempo: f64) -> Vec<Segment> {
    use Phoneme::*;
    let ms = |t: f64| ((t * tempo) * fs / 1000.0) as usize;
    let fm = p.formants();
    let voiced = if p.is_voiced() { 1.0 } else { 0.0 };
    let fric_band = match p {
        S | Z => (3500.0, 7000.0),
        SH | ZH | CH | JH => (2000.0, 5000.0),
        F | V | TH | DH => (1200.0, 7000.0),
        _ => (1500.0, 5000.0),
    };
    let seg = |len, voicing, noise| Segment { len, formants: fm, voicing, noise, band: fric_band };
    match p.class() {
        Class::Vowel => vec![seg(ms(if matches!(p, AW | AY | OY | EY | OW) { 150.0 } else { 115.0 }), 1.0, 0.0)],
        Class::Nasal => vec![seg(ms(65.0), 0.55, 0.0)],
        Class::Liquid | Class::Semivowel => vec![seg(ms(60.0), 0.75, 0.0)],
        Class::Aspirate => vec![Segment { noise: 0.25, band: (500.0, 4000.0), ..seg(ms(60.0), 0.0, 0.0) }],
        Class::Fricative => vec![seg(ms(95.0), 0.4 * voiced, if matches!(p, F | V | TH | DH) { 0.12 } else { 0.3 })],
        Class::Stop => vec![
            seg(ms(45.0), 0.12 * voiced, 0.0),
            Segment { noise: 0.35, band: (1000.0, 6000.0), ..seg(ms(18.0), 0.0, 0.0) },
        ],
        Class::Affricate => vec![seg(ms(40.0), 0.12 * voiced, 0.0), seg(ms(80.0), 0.3 * voiced, 0.3)],
    }
}

/// Two-pole resonator with unity gain at DC.
#[derive(Clone, Copy, Default)]
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, f: f64, bw: f64, fs: f64) {
        let t = 1.0 / fs;
        self.c = -(-2.0 * PI * bw * t).exp();
        self.b = 2.0 * (-PI * bw * t).exp() * (2.0 * PI * f * t).cos();
        self.a = 1.0 - self.b - self.c;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Second-order band-pass (constant peak gain) for frication noise.
#[derive(Clone, Copy, Default)]
struct BandPass {
    b0: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl BandPass {
    fn tune(&mut self, lo: f64, hi: f64, fs: f64) {
        let hi = hi.min(0.45 * fs);
        let f0 = (lo * hi).sqrt();
        let q = f0 / (hi - lo);
        let w = 2.0 * PI * f0 / fs;
        let alpha = w.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        self.b0 = alpha / a0;
        self.a1 = -2.0 * w.cos() / a0;
        self.a2 = (1.0 - alpha) / a0;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * (x - self.x2) - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Speak the phoneme groups (one per word) with `voice`. Words are separated
/// by short pauses and the utterance is framed by `pad_s` of silence.
pub fn synthesize_phonemes(words: &[Vec<Phoneme>], voice: &Voice, fs: f64, pad_s: f64) -> Result<MonoSignal> {
    voice.validate()?;
    let gap = |t: f64| Segment {
        len: (t * voice.tempo * fs / 1000.0) as usize,
        formants: [500.0, 1500.0, 2500.0],
        voicing: 0.0,
        noise: 0.0,
        band: (1000.0, 4000.0),
    };
    let mut segs = Vec::new();
    for (k, w) in words.iter().enumerate() {
        if k > 0 {
            segs.push(gap(70.0));
        }
        for &p in w {
            segs.extend(segment(p, fs, voice.tempo));
        }
    }
    let pad = (pad_s * fs) as usize;
    let body: usize = segs.iter().map(|s| s.len).sum();
    let mut rng = seed::rng(voice.seed);
    let mut out = vec![0.0; pad + body + pad];

    let mut res = [Resonator::default(); 5];
    let mut bp = BandPass::default();
    let mut pos = pad;
    let mut phase = 0.0;
    let mut glottal = 0.0;
    let mut prev = segs.first().copied();
    // per-utterance pitch jitter and declination
    let jitter: f64 = rng.random_range(-0.03..0.03);
    for (si, s) in segs.iter().enumerate() {
        bp.tune(s.band.0, s.band.1, fs);
        let from = prev.unwrap_or(*s);
        let ramp = (0.004 * fs) as usize;
        for n in 0..s.len {
            let t = pos as f64 / out.len() as f64;
            if n % BLOCK == 0 {
                // glide formants over the first 30 ms from the previous segment
                let g = ((n as f64) / (0.03 * fs)).min(1.0);
                for (k, r) in res.iter_mut().enumerate() {
                    let f = if k < 3 {
                        from.formants[k] + g * (s.formants[k] - from.formants[k])
                    } else if k == 3 {
                        F4
                    } else {
                        F5
                    };
                    r.tune(f * voice.formant_scale, BANDWIDTHS[k], fs);
                }
            }
            let f0 = voice.f0 * (1.0 + jitter) * (1.12 - 0.24 * t) * (1.0 + 0.02 * (2.0 * PI * 4.5 * pos as f64 / fs).sin());
            phase += f0 / fs;
            let pulse = if phase >= 1.0 {
                phase -= 1.0;
                1.0
            } else {
                0.0
            };
            // spectral tilt of the glottal flow
            glottal = 0.92 * glottal + pulse;
            let env = ((n.min(s.len - n) as f64) / ramp as f64).min(1.0);
            let white: f64 = StandardNormal.sample(&mut rng);
            let mut v = s.voicing * glottal * env;
            for r in res.iter_mut() {
                v = r.step(v);
            }
            let fr = s.noise * env * bp.step(white);
            out[pos] = v + fr;
            pos += 1;
        }
        prev = Some(segs[si]);
    }
    // normalize the speech level
    let active: Vec<f64> = out.iter().copied().filter(|v| v.abs() > 1e-6).collect();
    let rms = (active.iter().map(|v| v * v).sum::<f64>() / active.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = SPEECH_RMS / rms;
        out.iter_mut().for_each(|v| *v *= g);
    }
    MonoSignal::new(out, fs)
}

/// Speak `text`, pronouncing words through `lexicon`.
pub fn synthesize_text(text: &str, lexicon: &Lexicon, voice: &Voice, fs: f64) -> Result<MonoSignal> {
    let words: Vec<Vec<Phoneme>> = tokenize(text).iter().map(|w| lexicon.pronounce(w)).collect();
    if words.is_empty() {
        return Err(invalid("nothing to say"));
    }
    synthesize_phonemes(&words, voice, fs, 0.15)
}
