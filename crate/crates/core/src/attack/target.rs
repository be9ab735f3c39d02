//! Attack targets and label derivation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cipher::{CipherState, KeyMaterial};
use crate::leakage::STEPS;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lfsr {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetWord {
    /// Register word `index` as it stands before clock `step`.
    State { lfsr: Lfsr, index: u8 },
    /// The feedback word produced at clock `step`: u for A, v for B.
    Feedback { lfsr: Lfsr },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ByteHalf {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetSpec {
    pub word: TargetWord,
    pub step: u8,
    pub bits: u8,
    pub half: ByteHalf,
}

impl Default for TargetSpec {
    /// Low byte of A[8] on the freshly loaded state, 8-bit labels.
    fn default() -> Self {
        TargetSpec {
            word: TargetWord::State {
                lfsr: Lfsr::A,
                index: 8,
            },
            step: 0,
            bits: 8,
            half: ByteHalf::Low,
        }
    }
}

impl TargetSpec {
    pub fn feedback(lfsr: Lfsr, step: u8, half: ByteHalf) -> Self {
        TargetSpec {
            word: TargetWord::Feedback { lfsr },
            step,
            bits: 8,
            half,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4, 8].contains(&self.bits) {
            return Err(Error::InvalidTarget(format!("bits must be 1, 2, 4 or 8, got {}", self.bits)));
        }
        if self.step as usize >= STEPS {
            return Err(Error::InvalidTarget(format!("step must be below {STEPS}, got {}", self.step)));
        }
        if let TargetWord::State { index, .. } = self.word {
            if index >= 16 {
                return Err(Error::InvalidTarget(format!("register index {index} out of range")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        1 << self.bits
    }

    /// The full 16-bit target word for `km`.
    pub fn word_value(&self, km: &KeyMaterial) -> u16 {
        let mut st = CipherState::load(km);
        for _ in 0..self.step {
            st.lfsr_step();
        }
        match self.word {
            TargetWord::State { lfsr: Lfsr::A, index } => st.a[index as usize],
            TargetWord::State { lfsr: Lfsr::B, index } => st.b[index as usize],
            TargetWord::Feedback { lfsr } => {
                let s = st.lfsr_step();
                match lfsr {
                    Lfsr::A => s.u,
                    Lfsr::B => s.v,
                }
            }
        }
    }

    /// Selected byte of a word.
    pub fn byte_of(&self, word: u16) -> u8 {
        match self.half {
            ByteHalf::Low => word as u8,
            ByteHalf::High => (word >> 8) as u8,
        }
    }

    /// Class label: the low `bits` bits of the selected byte.
    pub fn label_of(&self, word: u16) -> usize {
        let byte = self.byte_of(word) as usize;
        byte & ((1 << self.bits) - 1)
    }
}

/// Label of `km` under `spec`.
pub fn derive_label(km: &KeyMaterial, spec: &TargetSpec) -> usize {
    spec.label_of(spec.word_value(km))
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reg = |l: Lfsr| match l {
            Lfsr::A => "a",
            Lfsr::B => "b",
        };
        match self.word {
            TargetWord::State { lfsr, index } => write!(f, "{}{index}", reg(lfsr))?,
            TargetWord::Feedback { lfsr: Lfsr::A } => f.write_str("u")?,
            TargetWord::Feedback { lfsr: Lfsr::B } => f.write_str("v")?,
        }
        let half = match self.half {
            ByteHalf::Low => "lo",
            ByteHalf::High => "hi",
        };
        write!(f, "-s{}-{half}-{}b", self.step, self.bits)
    }
}

impl FromStr for TargetSpec {
    type Err = Error;

    /// Inverse of `Display`: `<word>-s<step>-<lo|hi>-<bits>b`, where word is
    /// `u`, `v`, `a<i>` or `b<i>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("target {s:?}, expected e.g. u-s0-lo-8b or a8-s0-hi-4b"));
        let parts: Vec<&str> = s.split('-').collect();
        let [word, step, half, bits] = parts[..] else {
            return Err(bad());
        };
        let word = match word {
            "u" => TargetWord::Feedback { lfsr: Lfsr::A },
            "v" => TargetWord::Feedback { lfsr: Lfsr::B },
            w if w.len() > 1 => {
                let lfsr = match &w[..1] {
                    "a" => Lfsr::A,
                    "b" => Lfsr::B,
                    _ => return Err(bad()),
                };
                TargetWord::State {
                    lfsr,
                    index: w[1..].parse().map_err(|_| bad())?,
                }
            }
            _ => return Err(bad()),
        };
        let step = step.strip_prefix('s').and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let half = match half {
            "lo" => ByteHalf::Low,
            "hi" => ByteHalf::High,
            _ => return Err(bad()),
        };
        let bits = bits.strip_suffix('b').and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let t = TargetSpec { word, step, bits, half };
        t.validate()?;
        Ok(t)
    }
}

/// The 32 byte targets used for full key recovery, in recovery order.
pub fn feedback_targets() -> Vec<TargetSpec> {
    let mut out = Vec::with_capacity(4 * STEPS);
    for step in 0..STEPS as u8 {
        for lfsr in [Lfsr::A, Lfsr::B] {
            for half in [ByteHalf::Low, ByteHalf::High] {
                out.push(TargetSpec::feedback(lfsr, step, half));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_key_label_is_zero() {
        let km = KeyMaterial::new([0; 32], [0; 16]);
        assert_eq!(derive_label(&km, &TargetSpec::default()), 0);
    }

    #[test]
    fn k0_low_bit() {
        let mut key = [0u8; 32];
        key[0] = 0x01;
        let km = KeyMaterial::new(key, [0; 16]);
        let spec = TargetSpec {
            bits: 1,
            ..TargetSpec::default()
        };
        assert_eq!(derive_label(&km, &spec), 1);
    }

    #[test]
    fn bits_and_halves() {
        let mut key = [0u8; 32];
        key[0] = 0xb7;
        key[1] = 0x5c;
        let km = KeyMaterial::new(key, [0; 16]);
        let lo = TargetSpec::default();
        let hi = TargetSpec {
            half: ByteHalf::High,
            ..lo
        };
        assert_eq!(derive_label(&km, &lo), 0xb7);
        assert_eq!(derive_label(&km, &hi), 0x5c);
        assert_eq!(derive_label(&km, &TargetSpec { bits: 4, ..lo }), 0x7);
        assert_eq!(derive_label(&km, &TargetSpec { bits: 2, ..hi }), 0x0);
    }

    #[test]
    fn feedback_word_is_u() {
        let mut key = [0u8; 32];
        key[0] = 1;
        let km = KeyMaterial::new(key, [0; 16]);
        let spec = TargetSpec::feedback(Lfsr::A, 0, ByteHalf::High);
        assert_eq!(spec.word_value(&km), 0xcc87);
        assert_eq!(derive_label(&km, &spec), 0xcc);
        // The same word sits in a[15] before the next clock.
        let later = TargetSpec {
            word: TargetWord::State { lfsr: Lfsr::A, index: 15 },
            step: 1,
            ..spec
        };
        assert_eq!(later.word_value(&km), 0xcc87);
    }

    #[test]
    fn validation() {
        assert!(TargetSpec { bits: 3, ..TargetSpec::default() }.validate().is_err());
        assert!(TargetSpec { step: 8, ..TargetSpec::default() }.validate().is_err());
        assert!(TargetSpec::default().validate().is_ok());
        assert_eq!(TargetSpec::default().to_string(), "a8-s0-lo-8b");
    }

    #[test]
    fn parse_round_trip() {
        for t in feedback_targets() {
            assert_eq!(t.to_string().parse::<TargetSpec>().unwrap(), t);
        }
        let t: TargetSpec = "b15-s7-hi-2b".parse().unwrap();
        assert_eq!(t.word, TargetWord::State { lfsr: Lfsr::B, index: 15 });
        assert_eq!((t.step, t.bits, t.half), (7, 2, ByteHalf::High));
        for bad in ["", "u-s0-lo", "w-s0-lo-8b", "u-s8-lo-8b", "u-s0-mid-8b", "a16-s0-lo-8b", "u-s0-lo-3b"] {
            assert!(bad.parse::<TargetSpec>().is_err(), "{bad}");
        }
    }
}
