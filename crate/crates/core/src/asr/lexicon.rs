//! Pronouncing lexicon in CMU dictionary format and grapheme-to-phoneme
//! conversion with a rule-based fallback for unknown words.

use std::collections::BTreeMap;
use std::path::Path;

use super::levenshtein::levenshtein_within;
use super::phoneme::{Phoneme, PhonemeSequence};
use crate::error::{invalid, Error, Result};

const BUNDLED: &str = include_str!("../../data/lexicon.dict");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<Phoneme>>,
}

impl Lexicon {
    /// Parse `WORD  PH1 PH2 ...` lines; `;;;` comments and alternate
    /// pronunciations (`WORD(2)`) are skipped, stress digits dropped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default();
            if word.ends_with(')') {
                continue;
            }
            let phones = parts
                .map(str::parse)
                .collect::<Result<Vec<Phoneme>>>()
                .map_err(|e| invalid(format!("lexicon line {}: {e}", n + 1)))?;
            if phones.is_empty() {
                return Err(invalid(format!("lexicon line {}: {word} has no pronunciation", n + 1)));
            }
            entries.entry(word.to_lowercase()).or_insert(phones);
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The dictionary shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled lexicon parses")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[Phoneme]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    /// Lexicon entry, or the letter-to-sound rules for unknown words.
    pub fn pronounce(&self, word: &str) -> Vec<Phoneme> {
        self.get(word).map(<[Phoneme]>::to_vec).unwrap_or_else(|| letter_to_sound(word))
    }

    /// Closest word by phoneme edit distance. `prefer` wins ties; otherwise
    /// the alphabetically first word does.
    pub fn nearest_word(&self, phones: &[Phoneme], prefer: Option<&str>) -> (&str, usize) {
        let mut best: Option<(&str, usize)> = None;
        if let Some(w) = prefer.and_then(|w| self.entries.get_key_value(w)) {
            best = Some((w.0.as_str(), super::levenshtein::levenshtein(phones, w.1)));
        }
        for (word, pron) in &self.entries {
            // only a strictly closer word replaces the current best
            let bound = match best {
                Some((_, 0)) => break,
                Some((_, d)) => d - 1,
                None => usize::MAX,
            };
            if let Some(d) = levenshtein_within(phones, pron, bound) {
                best = Some((word.as_str(), d));
            }
        }
        best.unwrap_or(("", phones.len()))
    }
}

/// Lowercased word tokens of `text` (letters, digits and apostrophes).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Phonemes of every word of `text`, concatenated.
pub fn g2p(text: &str, lexicon: &Lexicon) -> PhonemeSequence {
    PhonemeSequence(tokenize(text).iter().flat_map(|w| lexicon.pronounce(w)).collect())
}

/// Deterministic spelling-to-sound rules for words missing from the lexicon.
pub fn letter_to_sound(word: &str) -> Vec<Phoneme> {
    use Phoneme::*;
    let w: Vec<char> = word.to_lowercase().chars().filter(|c| c.is_ascii_alphabetic()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    let at = |k: usize| w.get(k).copied();
    const DIGRAPHS: &[(&str, &[Phoneme])] = &[
        ("igh", &[AY]),
        ("tch", &[CH]),
        ("ch", &[CH]),
        ("sh", &[SH]),
        ("th", &[TH]),
        ("ph", &[F]),
        ("ng", &[NG]),
        ("ck", &[K]),
        ("qu", &[K, W]),
        ("ee", &[IY]),
        ("ea", &[IY]),
        ("oo", &[UW]),
        ("ai", &[EY]),
        ("ay", &[EY]),
        ("oa", &[OW]),
        ("ou", &[AW]),
        ("ow", &[OW]),
        ("oi", &[OY]),
        ("oy", &[OY]),
        ("er", &[ER]),
        ("ar", &[AA, R]),
        ("or", &[AO, R]),
    ];
    'outer: while i < w.len() {
        for (g, ph) in DIGRAPHS {
            let n = g.len();
            if i + n <= w.len() && w[i..i + n].iter().copied().eq(g.chars()) {
                out.extend_from_slice(ph);
                i += n;
                continue 'outer;
            }
        }
        let c = w[i];
        let next = at(i + 1);
        // doubled consonants sound once
        if next == Some(c) && !"aeiou".contains(c) {
            i += 1;
            continue;
        }
        let soft = matches!(next, Some('e' | 'i' | 'y'));
        let last = i + 1 == w.len();
        let ph: &[Phoneme] = match c {
            'a' => &[AE],
            'b' => &[B],
            'c' if soft => &[S],
            'c' => &[K],
            'd' => &[D],
            'e' if last && w.len() > 2 => &[],
            'e' => &[EH],
            'f' => &[F],
            'g' if soft => &[JH],
            'g' => &[G],
            'h' => &[HH],
            'i' => &[IH],
            'j' => &[JH],
            'k' => &[K],
            'l' => &[L],
            'm' => &[M],
            'n' => &[N],
            'o' => &[AA],
            'p' => &[P],
            'q' => &[K],
            'r' => &[R],
            's' => &[S],
            't' => &[T],
            'u' => &[AH],
            'v' => &[V],
            'w' => &[W],
            'x' => &[K, S],
            'y' if i == 0 => &[Y],
            'y' => &[IY],
            _ => &[Z],
        };
        out.extend_from_slice(ph);
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        let lex = Lexicon::bundled();
        let cat = g2p("cat", &lex);
        assert_eq!(cat, g2p("CAT", &lex));
        assert_eq!(cat.to_string(), "K AE T");
        assert_eq!(g2p("the red ball", &lex).to_string(), "DH AH R EH D B AO L");
        assert!(g2p("", &lex).is_empty());
    }

    #[test]
    fn fallback_is_deterministic() {
        let lex = Lexicon::bundled();
        assert!(lex.get("blorf").is_none());
        let a = g2p("blorf", &lex);
        assert_eq!(a, g2p("blorf", &lex));
        assert_eq!(a.to_string(), "B L AO R F");
        assert_eq!(letter_to_sound("night").len(), 3);
    }

    #[test]
    fn parse_skips_comments_and_alternates() {
        let lex = Lexicon::parse(";;; c\nREAD  R EH1 D\nREAD(2)  R IY1 D\n").unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.get("read").unwrap(), &[Phoneme::R, Phoneme::EH, Phoneme::D]);
        assert!(Lexicon::parse("BAD  XX\n").is_err());
    }

    #[test]
    fn nearest_word_prefers_the_given_homophone() {
        let lex = Lexicon::bundled();
        let to = lex.get("to").unwrap().to_vec();
        assert_eq!(lex.nearest_word(&to, Some("two")), ("two", 0));
        assert_eq!(lex.nearest_word(&to, Some("to")), ("to", 0));
        let (w, d) = lex.nearest_word(&[Phoneme::K, Phoneme::AE, Phoneme::T, Phoneme::S], None);
        assert_eq!(d, 1);
        assert!(!w.is_empty());
    }
}
