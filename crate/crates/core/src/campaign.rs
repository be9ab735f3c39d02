//! Trace sets and seeded acquisition campaigns.

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cipher::{KeyMaterial, IV_LEN, KEY_LEN};
use crate::leakage::{random_iv, random_key, trace_rng, Simulator};

/// A campaign of traces with their inputs. Row `i` of `samples` belongs to
/// `ivs[i]`, `keys[i]` and `fixed[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    pub samples: Array2<f32>,
    pub ivs: Vec<[u8; IV_LEN]>,
    /// Absent when the file was written without per-trace keys.
    pub keys: Option<Vec<[u8; KEY_LEN]>>,
    /// TVLA group tag.
    pub fixed: Vec<bool>,
}

impl TraceSet {
    pub fn empty(samples_per_trace: usize, with_keys: bool) -> Self {
        TraceSet {
            samples: Array2::zeros((0, samples_per_trace)),
            ivs: Vec::new(),
            keys: with_keys.then(Vec::new),
            fixed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ivs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn samples_per_trace(&self) -> usize {
        self.samples.ncols()
    }

    pub fn trace(&self, i: usize) -> ArrayView1<'_, f32> {
        self.samples.row(i)
    }

    /// Key and IV of trace `i`, when keys are stored.
    pub fn key_material(&self, i: usize) -> Option<KeyMaterial> {
        self.keys
            .as_ref()
            .map(|k| KeyMaterial::new(k[i], self.ivs[i]))
    }

    /// Traces at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> TraceSet {
        TraceSet {
            samples: self.samples.select(Axis(0), idx),
            ivs: idx.iter().map(|&i| self.ivs[i]).collect(),
            keys: self
                .keys
                .as_ref()
                .map(|k| idx.iter().map(|&i| k[i]).collect()),
            fixed: idx.iter().map(|&i| self.fixed[i]).collect(),
        }
    }

    pub fn without_keys(mut self) -> TraceSet {
        self.keys = None;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KeyPolicy {
    Fixed([u8; KEY_LEN]),
    /// A new random key for every trace.
    Fresh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IvPolicy {
    Fixed([u8; IV_LEN]),
    Random,
    /// Balanced, randomly interleaved fixed and random groups.
    FixedVsRandom([u8; IV_LEN]),
    /// Same interleaving, but both groups use the fixed IV. A null campaign
    /// for checking the t-test's false-positive rate.
    FixedVsFixed([u8; IV_LEN]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub n: usize,
    pub key_policy: KeyPolicy,
    pub iv_policy: IvPolicy,
    pub seed: u64,
    pub store_keys: bool,
}

const GROUP_STREAM: u64 = u64::MAX;

impl Campaign {
    /// Group tags: exactly `n / 2` fixed traces for the two-group policies.
    pub fn groups(&self) -> Vec<bool> {
        match self.iv_policy {
            IvPolicy::Fixed(_) => vec![true; self.n],
            IvPolicy::Random => vec![false; self.n],
            IvPolicy::FixedVsRandom(_) | IvPolicy::FixedVsFixed(_) => {
                let mut g: Vec<bool> = (0..self.n).map(|i| i < self.n / 2).collect();
                g.shuffle(&mut trace_rng(self.seed, GROUP_STREAM));
                g
            }
        }
    }

    fn inputs<R: RngCore>(&self, fixed: bool, rng: &mut R) -> KeyMaterial {
        let key = match &self.key_policy {
            KeyPolicy::Fixed(k) => *k,
            KeyPolicy::Fresh => random_key(rng),
        };
        let iv = match &self.iv_policy {
            IvPolicy::Fixed(iv) | IvPolicy::FixedVsFixed(iv) => *iv,
            IvPolicy::Random => random_iv(rng),
            IvPolicy::FixedVsRandom(iv) => {
                if fixed {
                    *iv
                } else {
                    random_iv(rng)
                }
            }
        };
        KeyMaterial::new(key, iv)
    }

    fn assemble(&self, samples: Vec<f32>, width: usize, kms: Vec<KeyMaterial>, fixed: Vec<bool>) -> TraceSet {
        TraceSet {
            samples: Array2::from_shape_vec((self.n, width), samples).expect("shape"),
            ivs: kms.iter().map(|k| k.iv).collect(),
            keys: self.store_keys.then(|| kms.iter().map(|k| k.key).collect()),
            fixed,
        }
    }

    /// Generates the campaign on the rayon pool.
    pub fn simulate(&self, sim: &Simulator) -> TraceSet {
        let width = sim.trace_len();
        let fixed = self.groups();
        let mut samples = vec![0f32; self.n * width];
        let kms: Vec<KeyMaterial> = samples
            .par_chunks_mut(width)
            .zip(fixed.par_iter())
            .enumerate()
            .map(|(i, (out, &f))| {
                let mut rng = trace_rng(self.seed, i as u64);
                let km = self.inputs(f, &mut rng);
                sim.simulate_into(&km, &mut rng, out);
                km
            })
            .collect();
        self.assemble(samples, width, kms, fixed)
    }

    /// Single-threaded generation; byte-identical to [`Campaign::simulate`].
    pub fn simulate_serial(&self, sim: &Simulator) -> TraceSet {
        let width = sim.trace_len();
        let fixed = self.groups();
        let mut samples = vec![0f32; self.n * width];
        let mut kms = Vec::with_capacity(self.n);
        for (i, out) in samples.chunks_mut(width).enumerate() {
            let mut rng = trace_rng(self.seed, i as u64);
            let km = self.inputs(fixed[i], &mut rng);
            sim.simulate_into(&km, &mut rng, out);
            kms.push(km);
        }
        self.assemble(samples, width, kms, fixed)
    }
}
