//! A stand-in for a cloud recognizer: the truth's phonemes are corrupted at a
//! given rate and decoded word by word to the nearest lexicon entry.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::levenshtein::levenshtein;
use super::lexicon::{g2p, tokenize, Lexicon};
use super::phoneme::{Phoneme, PhonemeSequence};
use crate::error::{invalid, Result};
use crate::seed;

pub const MAX_HYPOTHESES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub phonemes: PhonemeSequence,
}

/// Ranked n-best list, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisList {
    pub hypotheses: Vec<Hypothesis>,
}

impl HypothesisList {
    /// Build from ranked sentences, transcribing each with `lexicon`.
    pub fn from_texts<S: AsRef<str>>(texts: &[S], lexicon: &Lexicon) -> Result<Self> {
        if texts.is_empty() || texts.len() > MAX_HYPOTHESES {
            return Err(invalid(format!("a hypothesis list holds 1 to {MAX_HYPOTHESES} entries, got {}", texts.len())));
        }
        let hypotheses = texts
            .iter()
            .map(|t| Hypothesis { text: t.as_ref().to_string(), phonemes: g2p(t.as_ref(), lexicon) })
            .collect();
        Ok(Self { hypotheses })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

/// One JSON list per line.
pub fn write_jsonl(mut w: impl Write, lists: &[HypothesisList]) -> Result<()> {
    for l in lists {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(r: impl BufRead) -> Result<Vec<HypothesisList>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            let list: HypothesisList = serde_json::from_str(&line)?;
            if list.is_empty() || list.len() > MAX_HYPOTHESES {
                return Err(invalid(format!("hypothesis list with {} entries", list.len())));
            }
            out.push(list);
        }
    }
    Ok(out)
}

/// Logistic map from SNR (dB) to phoneme error rate,
/// `rate = 1 / (1 + exp((snr - midpoint) / scale))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRateMap {
    pub midpoint_db: f64,
    pub scale_db: f64,
}

impl SnrRateMap {
    /// The map through two `(snr_db, rate)` points.
    pub fn through(a: (f64, f64), b: (f64, f64)) -> Result<Self> {
        let logit = |r: f64| (r / (1.0 - r)).ln();
        for (_, r) in [a, b] {
            if !(r > 0.0 && r < 1.0) {
                return Err(invalid(format!("calibration rate {r} must be in (0, 1)")));
            }
        }
        let scale_db = (b.0 - a.0) / (logit(a.1) - logit(b.1));
        if !(scale_db > 0.0) || !scale_db.is_finite() {
            return Err(invalid("the error rate must fall as SNR rises"));
        }
        Ok(Self { midpoint_db: a.0 + scale_db * logit(a.1), scale_db })
    }

    pub fn rate(&self, snr_db: f64) -> f64 {
        if snr_db == f64::INFINITY {
            return 0.0;
        }
        1.0 / (1.0 + ((snr_db - self.midpoint_db) / self.scale_db).exp())
    }
}

impl Default for SnrRateMap {
    /// 20 dB -> 0.05, 0 dB -> 0.4.
    fn default() -> Self {
        Self::through((20.0, 0.05), (0.0, 0.4)).expect("valid calibration")
    }
}

fn random_phoneme(rng: &mut impl Rng, not: Option<Phoneme>) -> Phoneme {
    loop {
        let p = Phoneme::ALL[rng.random_range(0..Phoneme::ALL.len())];
        if Some(p) != not {
            return p;
        }
    }
}

/// Apply i.i.d. substitutions, deletions and insertions at `rate` per phoneme.
pub fn corrupt(phones: &[Phoneme], rate: f64, rng: &mut impl Rng) -> Vec<Phoneme> {
    let mut out = Vec::with_capacity(phones.len() + 2);
    for &p in phones {
        if rate > 0.0 && rng.random_bool(rate) {
            match rng.random_range(0..3) {
                0 => out.push(random_phoneme(rng, Some(p))),
                1 => {}
                _ => {
                    out.push(p);
                    out.push(random_phoneme(rng, None));
                }
            }
        } else {
            out.push(p);
        }
    }
    out
}

/// One recognizer output: every word corrupted independently and decoded
/// to the closest lexicon word (the spoken word wins ties, as homophones are
/// indistinguishable); words corrupted to nothing are dropped. Also returns
/// the number of phoneme edits the corruption made.
fn sample(words: &[String], prons: &[Vec<Phoneme>], rate: f64, seed: u64, lexicon: &Lexicon) -> (usize, Hypothesis) {
    let mut rng = seed::rng(seed);
    let mut edits = 0;
    let decoded: Vec<&str> = words
        .iter()
        .zip(prons)
        .filter_map(|(w, p)| {
            let heard = corrupt(p, rate, &mut rng);
            edits += levenshtein(&heard, p);
            (!heard.is_empty()).then(|| lexicon.nearest_word(&heard, Some(w)).0)
        })
        .collect();
    let text = decoded.join(" ");
    let phonemes = g2p(&text, lexicon);
    (edits, Hypothesis { text, phonemes })
}

/// Ten hypotheses for `truth` at phoneme error rate `rate`, least corrupted
/// first (fewest phoneme edits before decoding; stable on ties).
pub fn synth_hypotheses(truth: &str, rate: f64, seed: u64, lexicon: &Lexicon) -> Result<HypothesisList> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(invalid(format!("phoneme error rate {rate} is outside [0, 1]")));
    }
    let words = tokenize(truth);
    let prons: Vec<Vec<Phoneme>> = words.iter().map(|w| lexicon.pronounce(w)).collect();
    let mut ranked: Vec<(usize, Hypothesis)> = (0..MAX_HYPOTHESES)
        .map(|h| sample(&words, &prons, rate, seed::derive(seed, "hypothesis", h as u64), lexicon))
        .collect();
    ranked.sort_by_key(|(d, _)| *d);
    Ok(HypothesisList { hypotheses: ranked.into_iter().map(|(_, h)| h).collect() })
}
