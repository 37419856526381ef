//! Speech material: the bundled 24-speaker corpus (one utterance per speaker
//! drawn from the domain sentences) or a directory of WAV + transcript pairs.

use std::path::Path;

use crate::asr::{DomainCorpus, Lexicon};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::{read_wav_mono, MonoSignal, SAMPLE_RATE};
use crate::speech::{synthesize_text, Voice};

pub const SPEAKERS: usize = 24;
const MALE_SPEAKERS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub transcript: String,
    pub audio: MonoSignal,
}

/// Voice of speaker `k`: 16 male voices (f0 95-145 Hz) then 8 female
/// voices (f0 180-240 Hz, shorter vocal tract).
pub fn speaker_voice(k: usize, master_seed: u64) -> Voice {
    let (f0, formant_scale) = if k < MALE_SPEAKERS {
        (95.0 + 50.0 * k as f64 / (MALE_SPEAKERS - 1) as f64, 1.0 + 0.01 * (k % 4) as f64)
    } else {
        let j = k - MALE_SPEAKERS;
        (180.0 + 60.0 * j as f64 / 7.0, 1.15 + 0.01 * (j % 3) as f64)
    };
    Voice { f0, formant_scale, tempo: 0.95 + 0.03 * (k % 5) as f64, seed: seed::derive(master_seed, "speaker", k as u64) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    /// Speaker `k` reads domain sentence `8 k` (every eighth sentence), so the
    /// 24 utterances cover the 192-sentence domain evenly.
    pub fn bundled(lexicon: &Lexicon, domain: &DomainCorpus, master_seed: u64) -> Result<Self> {
        Self::bundled_reading(lexicon, domain, master_seed, 0..1)
    }

    /// Disjoint training material: speaker `k` reads sentences `8 k + 1` to
    /// `8 k + 7`, ordered sentence-major so every prefix mixes all voices.
    pub fn bundled_training(lexicon: &Lexicon, domain: &DomainCorpus, master_seed: u64) -> Result<Self> {
        let stride = (domain.len() / SPEAKERS).max(1);
        Self::bundled_reading(lexicon, domain, master_seed, 1..stride.max(2))
    }

    fn bundled_reading(
        lexicon: &Lexicon,
        domain: &DomainCorpus,
        master_seed: u64,
        offsets: std::ops::Range<usize>,
    ) -> Result<Self> {
        let stride = (domain.len() / SPEAKERS).max(1);
        let mut utterances = Vec::new();
        for o in offsets {
            for k in 0..SPEAKERS {
                let transcript = domain.sentences[(k * stride + o) % domain.len()].clone();
                let audio = synthesize_text(&transcript, lexicon, &speaker_voice(k, master_seed), SAMPLE_RATE)?;
                let id = if o == 0 { format!("spk{k:02}") } else { format!("spk{k:02}-{o}") };
                utterances.push(Utterance { id, transcript, audio });
            }
        }
        Ok(Self { utterances })
    }

    /// Every `name.wav` with a sibling `name.txt` transcript, sorted by name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::MissingInput(dir.to_path_buf()));
        }
        let mut wavs: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        wavs.sort();
        let mut utterances = Vec::new();
        for wav in wavs {
            let txt = wav.with_extension("txt");
            if !txt.exists() {
                continue;
            }
            utterances.push(Utterance {
                id: wav.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                transcript: std::fs::read_to_string(&txt)?.trim().to_string(),
                audio: read_wav_mono(&wav)?,
            });
        }
        if utterances.is_empty() {
            return Err(Error::MissingInput(dir.join("*.wav + *.txt")));
        }
        Ok(Self { utterances })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn audio(&self) -> Vec<MonoSignal> {
        self.utterances.iter().map(|u| u.audio.clone()).collect()
    }
}
