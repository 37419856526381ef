//! ARPAbet phoneme inventory (39 symbols, stress stripped).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

macro_rules! phonemes {
    ($($p:ident => $class:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Phoneme { $($p),* }

        impl Phoneme {
            pub const ALL: &'static [Phoneme] = &[$(Phoneme::$p),*];

            pub fn symbol(self) -> &'static str {
                match self { $(Phoneme::$p => stringify!($p)),* }
            }

            pub fn class(self) -> Class {
                match self { $(Phoneme::$p => Class::$class),* }
            }
        }

        impl FromStr for Phoneme {
            type Err = Error;

            /// Parses a symbol, ignoring a trailing stress digit.
            fn from_str(s: &str) -> Result<Self> {
                let bare = s.trim_end_matches(|c: char| c.is_ascii_digit());
                match bare.to_ascii_uppercase().as_str() {
                    $(stringify!($p) => Ok(Phoneme::$p),)*
                    _ => Err(invalid(format!("unknown phoneme {s:?}"))),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Vowel,
    Stop,
    Affricate,
    Fricative,
    Aspirate,
    Nasal,
    Liquid,
    Semivowel,
}

phonemes! {
    AA => Vowel, AE => Vowel, AH => Vowel, AO => Vowel, AW => Vowel, AY => Vowel,
    EH => Vowel, ER => Vowel, EY => Vowel, IH => Vowel, IY => Vowel, OW => Vowel,
    OY => Vowel, UH => Vowel, UW => Vowel,
    B => Stop, D => Stop, G => Stop, K => Stop, P => Stop, T => Stop,
    CH => Affricate, JH => Affricate,
    DH => Fricative, F => Fricative, S => Fricative, SH => Fricative, TH => Fricative,
    V => Fricative, Z => Fricative, ZH => Fricative,
    HH => Aspirate,
    M => Nasal, N => Nasal, NG => Nasal,
    L => Liquid, R => Liquid,
    W => Semivowel, Y => Semivowel,
}

impl Phoneme {
    pub fn is_vowel(self) -> bool {
        self.class() == Class::Vowel
    }

    /// Voiced phonemes are excited by the glottal source.
    pub fn is_voiced(self) -> bool {
        use Phoneme::*;
        !matches!(self, P | T | K | CH | F | TH | S | SH | HH)
    }

    /// Typical adult male formants F1..F3 in Hz, for voiced sonorants.
    pub fn formants(self) -> [f64; 3] {
        use Phoneme::*;
        match self {
            AA => [730.0, 1090.0, 2440.0],
            AE => [660.0, 1720.0, 2410.0],
            AH => [640.0, 1190.0, 2390.0],
            AO => [570.0, 840.0, 2410.0],
            AW => [680.0, 1100.0, 2400.0],
            AY => [690.0, 1500.0, 2500.0],
            EH => [530.0, 1840.0, 2480.0],
            ER => [490.0, 1350.0, 1690.0],
            EY => [480.0, 2000.0, 2600.0],
            IH => [390.0, 1990.0, 2550.0],
            IY => [270.0, 2290.0, 3010.0],
            OW => [450.0, 900.0, 2400.0],
            OY => [550.0, 1000.0, 2450.0],
            UH => [440.0, 1020.0, 2240.0],
            UW => [300.0, 870.0, 2240.0],
            M | N | NG => [280.0, 1300.0, 2500.0],
            L => [360.0, 1300.0, 2700.0],
            R => [420.0, 1300.0, 1600.0],
            W => [300.0, 700.0, 2200.0],
            Y => [260.0, 2100.0, 3000.0],
            _ => [500.0, 1500.0, 2500.0],
        }
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A pronunciation: phonemes in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhonemeSequence(pub Vec<Phoneme>);

impl PhonemeSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for PhonemeSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split_whitespace().map(str::parse).collect::<Result<Vec<_>>>().map(PhonemeSequence)
    }
}

impl fmt::Display for PhonemeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_round_trips() {
        assert_eq!(Phoneme::ALL.len(), 39);
        for &p in Phoneme::ALL {
            assert_eq!(p.symbol().parse::<Phoneme>().unwrap(), p);
        }
        assert_eq!("ah0".parse::<Phoneme>().unwrap(), Phoneme::AH);
        assert!("QX".parse::<Phoneme>().is_err());
    }

    #[test]
    fn sequence_text_form() {
        let s: PhonemeSequence = "K AE1 T".parse().unwrap();
        assert_eq!(s.to_string(), "K AE T");
        assert_eq!(s.len(), 3);
    }
}
