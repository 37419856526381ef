//! The closed set of sentences a recognizer result is matched against.

use std::path::Path;

use super::lexicon::{g2p, Lexicon};
use super::phoneme::PhonemeSequence;
use crate::error::{invalid, Error, Result};

const BUNDLED: &str = include_str!("../../data/domain.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCorpus {
    pub sentences: Vec<String>,
    pub phonemes: Vec<PhonemeSequence>,
}

impl DomainCorpus {
    pub fn new(sentences: Vec<String>, lexicon: &Lexicon) -> Result<Self> {
        if sentences.is_empty() {
            return Err(invalid("domain corpus is empty"));
        }
        let phonemes = sentences.iter().map(|s| g2p(s, lexicon)).collect();
        Ok(Self { sentences, phonemes })
    }

    /// One sentence per non-empty line.
    pub fn parse(text: &str, lexicon: &Lexicon) -> Result<Self> {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(), lexicon)
    }

    pub fn load(path: impl AsRef<Path>, lexicon: &Lexicon) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?, lexicon)
    }

    /// 192 robot-command sentences: verb x color x object x place.
    pub fn bundled(lexicon: &Lexicon) -> Self {
        Self::parse(BUNDLED, lexicon).expect("bundled domain parses")
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}
