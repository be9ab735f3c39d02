//! Full 256-bit key recovery from per-trace feedback-byte predictions.
//!
//! Clock `s` of the LFSR consumes key word `k_s` as a8 and `k_{8+s}` as b8.
//! Every other term of u_s and v_s is either IV, zero, or a key word already
//! recovered at an earlier clock. Removing them leaves mul_x_inv of the key
//! word, the same on every trace, so a plurality vote per byte settles it.

use rand::Rng;
use serde::{Deserialize, Serialize};
use snowv_ml::Scalar;

use super::profile::ClassifierBank;
use super::solve::{invert_masked, unmask, Recurrence};
use super::target::{ByteHalf, Lfsr, TargetSpec};
use super::vote::{mtd, plurality, Vote, MTD_TARGET};
use crate::campaign::TraceSet;
use crate::cipher::{mul_x, KeyMaterial, SnowV, ALPHA, BETA, IV_LEN, KEY_LEN};
use crate::leakage::{trace_rng, STEPS};
use crate::{Error, Result};

/// Source of per-trace feedback-byte guesses.
pub trait BytePredictor {
    /// One guessed byte per trace for an 8-bit feedback target.
    fn predict_bytes(&self, target: &TargetSpec, traces: &TraceSet) -> Result<Vec<u8>>;
}

impl<T: Scalar> BytePredictor for ClassifierBank<T> {
    fn predict_bytes(&self, target: &TargetSpec, traces: &TraceSet) -> Result<Vec<u8>> {
        let c = self
            .get(target)
            .ok_or_else(|| Error::InvalidTarget(format!("no classifier for {target}")))?;
        if target.bits != 8 {
            return Err(Error::InvalidTarget(format!("{target} is not a byte target")));
        }
        Ok(c.predict(traces)?.into_iter().map(|l| l as u8).collect())
    }
}

/// Predicts the true byte for a known key. For tests and baselines.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    pub key: [u8; KEY_LEN],
}

impl BytePredictor for OraclePredictor {
    fn predict_bytes(&self, target: &TargetSpec, traces: &TraceSet) -> Result<Vec<u8>> {
        Ok(true_bytes(&self.key, target, traces))
    }
}

/// Correct with probability `accuracy`, otherwise a uniformly random wrong
/// byte. Draws are seeded per (target, trace).
#[derive(Clone, Debug)]
pub struct NoisyOracle {
    pub key: [u8; KEY_LEN],
    pub accuracy: f64,
    pub seed: u64,
}

impl BytePredictor for NoisyOracle {
    fn predict_bytes(&self, target: &TargetSpec, traces: &TraceSet) -> Result<Vec<u8>> {
        let tag = u64::from(target.step) << 2
            | u64::from(matches!(target.word, super::target::TargetWord::Feedback { lfsr: Lfsr::B })) << 1
            | u64::from(target.half == ByteHalf::High);
        let mut rng = trace_rng(self.seed, tag);
        Ok(true_bytes(&self.key, target, traces)
            .into_iter()
            .map(|b| {
                if rng.gen_bool(self.accuracy) {
                    b
                } else {
                    b ^ rng.gen_range(1..=255u8)
                }
            })
            .collect())
    }
}

fn true_bytes(key: &[u8; KEY_LEN], target: &TargetSpec, traces: &TraceSet) -> Vec<u8> {
    traces
        .ivs
        .iter()
        .map(|iv| target.byte_of(target.word_value(&KeyMaterial::new(*key, *iv))))
        .collect()
}

/// A known IV and the keystream it produced, for confirming a recovered key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeystreamCheck {
    #[serde(with = "hex_bytes")]
    pub iv: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub keystream: Vec<u8>,
}

#[derive(Clone, Debug, Default)]
pub struct RecoverConfig {
    /// Votes whose margin falls below this are flagged low confidence.
    pub min_margin: f64,
    pub check: Option<KeystreamCheck>,
    pub ground_truth: Option<[u8; KEY_LEN]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordResult {
    pub lfsr: Lfsr,
    pub step: u8,
    /// Index of the recovered key word, 0..16.
    pub key_word: u8,
    pub value: u16,
    /// Votes on the low and high byte of mul_x_inv of the key word.
    pub votes: [VoteSummary; 2],
    pub low_confidence: bool,
    /// Per-trace accuracy of the predicted feedback bytes, when the true key
    /// is known.
    pub byte_accuracy: Option<[f64; 2]>,
    /// Traces needed for the weaker byte to reach the vote target.
    pub mtd: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteSummary {
    pub value: u8,
    pub count: usize,
    pub runner_up: usize,
    pub total: usize,
    pub margin: f64,
}

impl From<Vote> for VoteSummary {
    fn from(v: Vote) -> Self {
        VoteSummary {
            value: v.value,
            count: v.count,
            runner_up: v.runner_up,
            total: v.total,
            margin: v.margin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub traces_used: usize,
    pub words: Vec<WordResult>,
    #[serde(with = "hex_bytes")]
    pub recovered_key: Vec<u8>,
    /// Byte positions that disagree with the ground truth or fail the
    /// keystream check.
    pub mismatched_bytes: Vec<usize>,
    pub keystream_verified: Option<bool>,
    pub success: bool,
}

impl AttackResult {
    pub fn key(&self) -> [u8; KEY_LEN] {
        self.recovered_key.as_slice().try_into().expect("32-byte key")
    }

    pub fn low_confidence_words(&self) -> usize {
        self.words.iter().filter(|w| w.low_confidence).count()
    }
}

/// Per-trace register contents with a known-word mask.
#[derive(Clone, Copy)]
struct Sym {
    a: [u16; 16],
    b: [u16; 16],
    known_a: u16,
    known_b: u16,
}

impl Sym {
    fn load(iv: &[u8; IV_LEN]) -> Self {
        let mut a = [0u16; 16];
        for (i, w) in a[..8].iter_mut().enumerate() {
            *w = u16::from_le_bytes([iv[2 * i], iv[2 * i + 1]]);
        }
        Sym {
            a,
            b: [0; 16],
            known_a: 0x00ff,
            known_b: 0x00ff,
        }
    }

    fn get(&self, lfsr: Lfsr, i: usize) -> Result<u16> {
        let (reg, mask) = match lfsr {
            Lfsr::A => (&self.a, self.known_a),
            Lfsr::B => (&self.b, self.known_b),
        };
        if mask >> i & 1 == 1 {
            Ok(reg[i])
        } else {
            Err(Error::Degenerate(format!("register word {lfsr:?}[{i}] unknown")))
        }
    }

    fn known_terms(&self, which: Recurrence) -> Result<[u16; 3]> {
        Ok(match which {
            Recurrence::A => [self.get(Lfsr::A, 0)?, self.get(Lfsr::A, 1)?, self.get(Lfsr::B, 0)?],
            Recurrence::B => [self.get(Lfsr::B, 0)?, self.get(Lfsr::B, 3)?, self.get(Lfsr::A, 0)?],
        })
    }

    fn set8(&mut self, a8: u16, b8: u16) {
        self.a[8] = a8;
        self.b[8] = b8;
        self.known_a |= 1 << 8;
        self.known_b |= 1 << 8;
    }

    /// One clock. The new words are known whenever all their inputs are.
    fn step(&mut self) {
        use crate::cipher::{mul_x_inv, ALPHA_INV, BETA_INV};
        let u_known = self.known_a & 0b1_0000_0011 == 0b1_0000_0011 && self.known_b & 1 == 1;
        let v_known = self.known_b & 0b1_0000_1001 == 0b1_0000_1001 && self.known_a & 1 == 1;
        let (a, b) = (&self.a, &self.b);
        let u = mul_x(a[0], ALPHA) ^ a[1] ^ mul_x_inv(a[8], ALPHA_INV) ^ b[0];
        let v = mul_x(b[0], BETA) ^ b[3] ^ mul_x_inv(b[8], BETA_INV) ^ a[0];
        self.a.copy_within(1.., 0);
        self.b.copy_within(1.., 0);
        self.a[15] = u;
        self.b[15] = v;
        self.known_a = self.known_a >> 1 | u16::from(u_known) << 15;
        self.known_b = self.known_b >> 1 | u16::from(v_known) << 15;
    }
}

fn accuracy_of(pred: &[u8], truth: &[u8]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / pred.len().max(1) as f64
}

/// Recovers all sixteen key words from `traces` (fixed key, known IVs).
pub fn recover_full_key<P: BytePredictor + ?Sized>(
    predictor: &P,
    traces: &TraceSet,
    cfg: &RecoverConfig,
) -> Result<AttackResult> {
    if traces.is_empty() {
        return Err(Error::InsufficientData("no attack traces".into()));
    }
    let mut syms: Vec<Sym> = traces.ivs.iter().map(Sym::load).collect();
    let mut key_words = [0u16; 16];
    let mut words = Vec::with_capacity(16);

    for step in 0..STEPS as u8 {
        let mut solved = [0u16; 2];
        for (slot, (lfsr, rec)) in [(Lfsr::A, Recurrence::A), (Lfsr::B, Recurrence::B)]
            .into_iter()
            .enumerate()
        {
            let lo_t = TargetSpec::feedback(lfsr, step, ByteHalf::Low);
            let hi_t = TargetSpec::feedback(lfsr, step, ByteHalf::High);
            let lo = predictor.predict_bytes(&lo_t, traces)?;
            let hi = predictor.predict_bytes(&hi_t, traces)?;
            if lo.len() != traces.len() || hi.len() != traces.len() {
                return Err(Error::Incompatible("predictor returned the wrong number of bytes".into()));
            }
            // With the known terms stripped, every trace predicts the same
            // word mul_x_inv(k), and each byte rests on one classifier.
            let mut z_lo = Vec::with_capacity(traces.len());
            let mut z_hi = Vec::with_capacity(traces.len());
            for (i, sym) in syms.iter().enumerate() {
                let out = u16::from(lo[i]) | u16::from(hi[i]) << 8;
                let z = unmask(out, sym.known_terms(rec)?, rec);
                z_lo.push(z as u8);
                z_hi.push((z >> 8) as u8);
            }
            let votes = [plurality(&z_lo), plurality(&z_hi)];
            let value = invert_masked(u16::from(votes[0].value) | u16::from(votes[1].value) << 8, rec);
            solved[slot] = value;

            let byte_accuracy = cfg.ground_truth.map(|k| {
                [
                    accuracy_of(&lo, &true_bytes(&k, &lo_t, traces)),
                    accuracy_of(&hi, &true_bytes(&k, &hi_t, traces)),
                ]
            });
            let mtd = byte_accuracy.and_then(|acc| mtd(acc[0].min(acc[1]), MTD_TARGET).ok().map(|m| m.traces));
            let key_word = match lfsr {
                Lfsr::A => step,
                Lfsr::B => 8 + step,
            };
            key_words[key_word as usize] = value;
            words.push(WordResult {
                lfsr,
                step,
                key_word,
                value,
                low_confidence: votes.iter().any(|v| v.margin() < cfg.min_margin),
                votes: votes.map(VoteSummary::from),
                byte_accuracy,
                mtd,
            });
        }
        for sym in &mut syms {
            sym.set8(solved[0], solved[1]);
            sym.step();
        }
    }

    words.sort_by_key(|w| w.key_word);
    let key = KeyMaterial::from_words(&key_words, &[0; 8]).key;
    let mut mismatched = Vec::new();
    if let Some(truth) = cfg.ground_truth {
        mismatched.extend((0..KEY_LEN).filter(|&i| key[i] != truth[i]));
    }
    let keystream_verified = match &cfg.check {
        Some(check) => {
            let iv: [u8; IV_LEN] = check.iv.as_slice().try_into().map_err(|_| Error::InvalidLength {
                what: "check IV",
                expected: IV_LEN,
                actual: check.iv.len(),
            })?;
            let mut ks = vec![0u8; check.keystream.len()];
            SnowV::new(&KeyMaterial::new(key, iv)).keystream(&mut ks);
            Some(ks == check.keystream)
        }
        None => None,
    };
    let success = match (cfg.ground_truth, keystream_verified) {
        (Some(_), Some(ok)) => mismatched.is_empty() && ok,
        (Some(_), None) => mismatched.is_empty(),
        (None, Some(ok)) => ok,
        (None, None) => words.iter().all(|w| !w.low_confidence),
    };
    Ok(AttackResult {
        traces_used: traces.len(),
        words,
        recovered_key: key.to_vec(),
        mismatched_bytes: mismatched,
        keystream_verified,
        success,
    })
}

mod hex_bytes {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::cipher::hex(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() % 2 != 0 {
            return Err(de::Error::custom("odd-length hex string"));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{Campaign, IvPolicy, KeyPolicy};
    use crate::leakage::{LeakModel, Simulator};

    fn attack_set(n: usize, key: [u8; 32]) -> TraceSet {
        let sim = Simulator::new(LeakModel::hamming_weight(1.0)).unwrap();
        Campaign {
            n,
            key_policy: KeyPolicy::Fixed(key),
            iv_policy: IvPolicy::Random,
            seed: 5,
            store_keys: false,
        }
        .simulate(&sim)
    }

    #[test]
    fn oracle_recovers_key_from_one_trace() {
        let key: [u8; 32] = core::array::from_fn(|i| (i * 37 + 1) as u8);
        let ts = attack_set(1, key);
        let r = recover_full_key(
            &OraclePredictor { key },
            &ts,
            &RecoverConfig {
                ground_truth: Some(key),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.key(), key);
        assert!(r.success);
        assert_eq!(r.words.len(), 16);
        assert_eq!(r.words[3].byte_accuracy, Some([1.0, 1.0]));
        assert_eq!(r.words[3].mtd, Some(1));
    }

    #[test]
    fn keystream_check() {
        let key = [0xab; 32];
        let ts = attack_set(3, key);
        let iv = [9u8; 16];
        let mut ks = vec![0u8; 32];
        SnowV::new(&KeyMaterial::new(key, iv)).keystream(&mut ks);
        let mut cfg = RecoverConfig {
            check: Some(KeystreamCheck {
                iv: iv.to_vec(),
                keystream: ks.clone(),
            }),
            ..Default::default()
        };
        let r = recover_full_key(&OraclePredictor { key }, &ts, &cfg).unwrap();
        assert_eq!(r.keystream_verified, Some(true));
        assert!(r.success);
        ks[0] ^= 1;
        cfg.check.as_mut().unwrap().keystream = ks;
        let r = recover_full_key(&OraclePredictor { key }, &ts, &cfg).unwrap();
        assert_eq!(r.keystream_verified, Some(false));
        assert!(!r.success);
    }

    #[test]
    fn wrong_predictions_report_mismatches() {
        let key = [0x11; 32];
        let ts = attack_set(5, key);
        let r = recover_full_key(
            &OraclePredictor { key: [0x22; 32] },
            &ts,
            &RecoverConfig {
                ground_truth: Some(key),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!r.success);
        assert!(!r.mismatched_bytes.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let key = [3; 32];
        let ts = attack_set(2, key);
        let r = recover_full_key(&OraclePredictor { key }, &ts, &RecoverConfig::default()).unwrap();
        let js = serde_json::to_string(&r).unwrap();
        assert!(js.contains(&"03".repeat(32)));
        let back: AttackResult = serde_json::from_str(&js).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_set_is_an_error() {
        let ts = TraceSet::empty(10, false);
        assert!(recover_full_key(&OraclePredictor { key: [0; 32] }, &ts, &RecoverConfig::default()).is_err());
    }
}
