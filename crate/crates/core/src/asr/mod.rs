//! Domain-dependent phonetic post-processing of recognizer output: the n-best
//! list is transcribed to phonemes and the domain sentence closest to any
//! hypothesis wins.

pub mod domain;
pub mod levenshtein;
pub mod lexicon;
pub mod phoneme;
pub mod recognizer;

pub use domain::DomainCorpus;
pub use levenshtein::levenshtein;
pub use lexicon::{g2p, tokenize, Lexicon};
pub use phoneme::{Phoneme, PhonemeSequence};
pub use recognizer::{synth_hypotheses, Hypothesis, HypothesisList, SnrRateMap};

use crate::error::{invalid, Result};
use levenshtein::levenshtein_within;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rerank {
    /// Index into the domain corpus of the winning sentence.
    pub sentence: usize,
    /// Rank of the hypothesis that matched it (0 = best).
    pub hypothesis: usize,
    pub distance: usize,
}

/// Minimum phoneme distance over all (hypothesis, domain sentence) pairs;
/// ties go to the better-ranked hypothesis, then the earlier sentence.
pub fn rerank(hyps: &HypothesisList, domain: &DomainCorpus) -> Result<Rerank> {
    if hyps.is_empty() || domain.is_empty() {
        return Err(invalid("re-ranking needs hypotheses and a domain corpus"));
    }
    let mut best: Option<Rerank> = None;
    for (h, hyp) in hyps.hypotheses.iter().enumerate() {
        for (s, ph) in domain.phonemes.iter().enumerate() {
            let bound = match best {
                Some(b) if b.distance == 0 => return Ok(b),
                Some(b) => b.distance - 1,
                None => usize::MAX,
            };
            if let Some(distance) = levenshtein_within(&hyp.phonemes.0, &ph.0, bound) {
                best = Some(Rerank { sentence: s, hypothesis: h, distance });
            }
        }
    }
    Ok(best.expect("non-empty inputs"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub wer: f64,
    pub ser: f64,
    pub sentences: usize,
    pub sentence_errors: usize,
    pub word_errors: usize,
    pub reference_words: usize,
}

/// Word and sentence error rates of `(recognized, reference)` pairs.
pub fn score<S: AsRef<str>>(results: &[(S, S)]) -> Result<Score> {
    if results.is_empty() {
        return Err(invalid("nothing to score"));
    }
    let (mut word_errors, mut reference_words, mut sentence_errors) = (0, 0, 0);
    for (got, want) in results {
        let (g, w) = (tokenize(got.as_ref()), tokenize(want.as_ref()));
        let d = levenshtein(&g, &w);
        word_errors += d;
        reference_words += w.len();
        sentence_errors += usize::from(g != w);
    }
    let sentences = results.len();
    Ok(Score {
        wer: if reference_words == 0 { 0.0 } else { word_errors as f64 / reference_words as f64 },
        ser: sentence_errors as f64 / sentences as f64,
        sentences,
        sentence_errors,
        word_errors,
        reference_words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lex: &Lexicon, lines: &[&str]) -> DomainCorpus {
        DomainCorpus::new(lines.iter().map(|s| s.to_string()).collect(), lex).unwrap()
    }

    #[test]
    fn exact_hypothesis_wins_with_zero_distance() {
        let lex = Lexicon::bundled();
        let d = DomainCorpus::bundled(&lex);
        let truth = &d.sentences[37];
        let hyps = HypothesisList::from_texts(&["bring the bread ball", truth.as_str()], &lex).unwrap();
        let r = rerank(&hyps, &d).unwrap();
        assert_eq!((r.sentence, r.distance, r.hypothesis), (37, 0, 1));
    }

    #[test]
    fn single_sentence_domain_always_wins() {
        let lex = Lexicon::bundled();
        let d = corpus(&lex, &["push the cup"]);
        let hyps = HypothesisList::from_texts(&["hello world", "seen"], &lex).unwrap();
        assert_eq!(rerank(&hyps, &d).unwrap().sentence, 0);
    }

    #[test]
    fn matches_exhaustive_pair_search() {
        let lex = Lexicon::bundled();
        let d = corpus(&lex, &["red cup", "blue cup", "green book"]);
        let hyps = HypothesisList::from_texts(&["bread cop", "blew cap", "grin look"], &lex).unwrap();
        let mut want = (usize::MAX, 0, 0);
        for (h, hp) in hyps.hypotheses.iter().enumerate() {
            for (s, sp) in d.phonemes.iter().enumerate() {
                let dist = levenshtein(&hp.phonemes.0, &sp.0);
                if dist < want.0 {
                    want = (dist, h, s);
                }
            }
        }
        let r = rerank(&hyps, &d).unwrap();
        assert_eq!((r.distance, r.hypothesis, r.sentence), want);
    }

    #[test]
    fn ties_prefer_rank_then_domain_order() {
        let lex = Lexicon::bundled();
        // "bed" is one substitution from both "red" and "wed"
        let d = corpus(&lex, &["wed", "red"]);
        let hyps = HypothesisList::from_texts(&["bed", "bed"], &lex).unwrap();
        let r = rerank(&hyps, &d).unwrap();
        assert_eq!((r.hypothesis, r.sentence, r.distance), (0, 0, 1));
    }

    #[test]
    fn scoring() {
        let perfect = score(&[("a b", "a b"), ("c", "c")]).unwrap();
        assert_eq!((perfect.ser, perfect.wer), (0.0, 0.0));
        let one_wrong = score(&[("a", "a"), ("b", "b"), ("c", "c"), ("x", "d")]).unwrap();
        assert_eq!(one_wrong.ser, 0.25);
        let two_subs = score(&[("one two six four five six seven eight nine zero", "one two three four five six seven eight nine ten")])
            .unwrap();
        assert!((two_subs.wer - 0.2).abs() < 1e-15);
        assert!(score::<&str>(&[]).is_err());
    }
}
