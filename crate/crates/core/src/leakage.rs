//! Power-trace simulator for the first eight LFSR clocks after key/IV load.
//!
//! Each clock produces a fixed list of leakage events. The six computed
//! values (u, v and the four tap multiplications) always leak. With
//! `register_writes` on, the shift of both registers also leaks: one event per
//! destination slot carrying the word written there. An event spans
//! `leak_width` consecutive samples starting at its offset inside the step
//! window. Every sample of an event is a weighted bit count of the value,
//!
//! ```text
//! sample = scale * sum_b w[event][k][b] * bit_b(value) + N(0, noise_sigma^2)
//! ```
//!
//! with per-bit weights `|1 + weight_spread * N(0, 1)|` drawn once from
//! `device_seed`. At `weight_spread = 0` this is `scale * HW(value)`.
//!
//! Randomness comes from ChaCha8 seeded with the campaign seed, one stream
//! per trace index, so a trace depends only on `(seed, index)`. Gaussian
//! draws use the Box-Muller transform on two uniform 53-bit doubles.

use std::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cipher::{CipherState, KeyMaterial, IV_LEN, KEY_LEN};
use crate::{Error, Result};

pub const STEPS: usize = 8;
pub const COMPUTE_EVENTS: usize = 6;
pub const WRITE_EVENTS: usize = 32;

/// What a leakage event carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    U,
    V,
    MulxA,
    MulxB,
    MulxInvA,
    MulxInvB,
    /// Word written to slot `j` of LFSR-A by the shift.
    WriteA(u8),
    WriteB(u8),
}

impl Event {
    /// Event `i` in leak order: the six computations, then A writes, then B writes.
    pub fn from_index(i: usize) -> Event {
        match i {
            0 => Event::U,
            1 => Event::V,
            2 => Event::MulxA,
            3 => Event::MulxB,
            4 => Event::MulxInvA,
            5 => Event::MulxInvB,
            6..=21 => Event::WriteA((i - 6) as u8),
            22..=37 => Event::WriteB((i - 22) as u8),
            _ => panic!("event index {i} out of range"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakModel {
    pub scale: f64,
    pub noise_sigma: f64,
    pub samples_per_step: usize,
    /// Start offset of each event inside the step window, in event order.
    pub leak_offsets: Vec<usize>,
    pub background_len: usize,
    pub leak_width: usize,
    pub register_writes: bool,
    pub weight_spread: f64,
    pub device_seed: u64,
}

impl Default for LeakModel {
    fn default() -> Self {
        let width = 4;
        LeakModel {
            scale: 1.0,
            noise_sigma: 1.0,
            samples_per_step: 160,
            leak_offsets: (0..COMPUTE_EVENTS + WRITE_EVENTS).map(|e| e * width).collect(),
            background_len: 64,
            leak_width: width,
            register_writes: true,
            weight_spread: 0.5,
            device_seed: 0x5eed_0f_de71ce,
        }
    }
}

impl LeakModel {
    /// Plain Hamming-weight model: six single-sample events, unit weights.
    pub fn hamming_weight(noise_sigma: f64) -> Self {
        LeakModel {
            scale: 1.0,
            noise_sigma,
            samples_per_step: 32,
            leak_offsets: (0..COMPUTE_EVENTS).map(|e| e * 4).collect(),
            background_len: 64,
            leak_width: 1,
            register_writes: false,
            weight_spread: 0.0,
            device_seed: 0,
        }
    }

    pub fn events_per_step(&self) -> usize {
        if self.register_writes {
            COMPUTE_EVENTS + WRITE_EVENTS
        } else {
            COMPUTE_EVENTS
        }
    }

    pub fn trace_len(&self) -> usize {
        self.background_len + STEPS * self.samples_per_step
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if !self.scale.is_finite() || !(self.weight_spread >= 0.0) {
            return bad("scale must be finite and weight_spread >= 0".into());
        }
        if self.samples_per_step == 0 || self.leak_width == 0 {
            return bad("samples_per_step and leak_width must be positive".into());
        }
        if self.leak_offsets.len() != self.events_per_step() {
            return bad(format!(
                "expected {} leak offsets, got {}",
                self.events_per_step(),
                self.leak_offsets.len()
            ));
        }
        let mut seen = self.leak_offsets.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.leak_offsets.len() {
            return bad("leak offsets must be distinct".into());
        }
        if let Some(&o) = self
            .leak_offsets
            .iter()
            .find(|&&o| o + self.leak_width > self.samples_per_step)
        {
            return bad(format!(
                "offset {o} + width {} exceeds samples_per_step {}",
                self.leak_width, self.samples_per_step
            ));
        }
        Ok(())
    }
}

pub fn hamming_weight(v: u16) -> u32 {
    v.count_ones()
}

/// Standard normal pair from two uniforms (Box-Muller).
pub fn gaussian_pair<R: RngCore>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Independent generator for trace `index` of a campaign.
pub fn trace_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A leak model with its weight tables expanded.
#[derive(Clone, Debug)]
pub struct Simulator {
    model: LeakModel,
    // [event][k] -> lookup on the low and high byte of the value.
    lo: Vec<[f32; 256]>,
    hi: Vec<[f32; 256]>,
}

impl Simulator {
    pub fn new(model: LeakModel) -> Result<Self> {
        model.validate()?;
        let events = model.events_per_step();
        let width = model.leak_width;
        let mut rng = ChaCha8Rng::seed_from_u64(model.device_seed);
        let mut pending: Option<f64> = None;
        let mut normal = || match pending.take() {
            Some(z) => z,
            None => {
                let (a, b) = gaussian_pair(&mut rng);
                pending = Some(b);
                a
            }
        };
        let mut lo = Vec::with_capacity(events * width);
        let mut hi = Vec::with_capacity(events * width);
        for _ in 0..events * width {
            let mut w = [0f64; 16];
            for wb in w.iter_mut() {
                *wb = if model.weight_spread == 0.0 {
                    1.0
                } else {
                    (1.0 + model.weight_spread * normal()).abs()
                };
            }
            let table = |bits: &[f64]| {
                let mut t = [0f32; 256];
                for (byte, slot) in t.iter_mut().enumerate() {
                    let s: f64 = (0..8).filter(|b| byte >> b & 1 == 1).map(|b| bits[b]).sum();
                    *slot = (model.scale * s) as f32;
                }
                t
            };
            lo.push(table(&w[..8]));
            hi.push(table(&w[8..]));
        }
        Ok(Simulator { model, lo, hi })
    }

    pub fn model(&self) -> &LeakModel {
        &self.model
    }

    pub fn trace_len(&self) -> usize {
        self.model.trace_len()
    }

    /// Sample range covered by `event` at `step`.
    pub fn event_samples(&self, step: usize, event: usize) -> Range<usize> {
        let start =
            self.model.background_len + step * self.model.samples_per_step + self.model.leak_offsets[event];
        start..start + self.model.leak_width
    }

    /// Noise-free leakage of one value for one event sample.
    pub fn leak_value(&self, event: usize, k: usize, value: u16) -> f32 {
        let t = event * self.model.leak_width + k;
        self.lo[t][(value & 0xff) as usize] + self.hi[t][(value >> 8) as usize]
    }

    /// Values carried by each event for the eight clocks after load.
    pub fn event_values(&self, km: &KeyMaterial) -> Vec<[u16; COMPUTE_EVENTS + WRITE_EVENTS]> {
        let mut st = CipherState::load(km);
        (0..STEPS)
            .map(|_| {
                let s = st.lfsr_step();
                let mut vals = [0u16; COMPUTE_EVENTS + WRITE_EVENTS];
                vals[..COMPUTE_EVENTS].copy_from_slice(&[
                    s.u,
                    s.v,
                    s.mulx_a,
                    s.mulx_b,
                    s.mulx_inv_a,
                    s.mulx_inv_b,
                ]);
                vals[COMPUTE_EVENTS..COMPUTE_EVENTS + 16].copy_from_slice(&st.a);
                vals[COMPUTE_EVENTS + 16..].copy_from_slice(&st.b);
                vals
            })
            .collect()
    }

    /// Writes the noise-free trace into `out`.
    pub fn noiseless_into(&self, km: &KeyMaterial, out: &mut [f32]) {
        assert_eq!(out.len(), self.trace_len());
        out.fill(0.0);
        let events = self.model.events_per_step();
        for (step, vals) in self.event_values(km).iter().enumerate() {
            for (e, &value) in vals.iter().enumerate().take(events) {
                let start = self.event_samples(step, e).start;
                for k in 0..self.model.leak_width {
                    out[start + k] += self.leak_value(e, k, value);
                }
            }
        }
    }

    pub fn noiseless(&self, km: &KeyMaterial) -> Vec<f32> {
        let mut out = vec![0.0; self.trace_len()];
        self.noiseless_into(km, &mut out);
        out
    }

    /// Noise-free trace plus Gaussian noise from `rng`.
    pub fn simulate_into<R: RngCore>(&self, km: &KeyMaterial, rng: &mut R, out: &mut [f32]) {
        self.noiseless_into(km, out);
        let sigma = self.model.noise_sigma;
        if sigma == 0.0 {
            return;
        }
        for pair in out.chunks_mut(2) {
            let (a, b) = gaussian_pair(rng);
            pair[0] += (sigma * a) as f32;
            if let Some(x) = pair.get_mut(1) {
                *x += (sigma * b) as f32;
            }
        }
    }

    pub fn simulate_trace<R: RngCore>(&self, km: &KeyMaterial, rng: &mut R) -> Vec<f32> {
        let mut out = vec![0.0; self.trace_len()];
        self.simulate_into(km, rng, &mut out);
        out
    }
}

pub(crate) fn random_key<R: RngCore>(rng: &mut R) -> [u8; KEY_LEN] {
    let mut k = [0u8; KEY_LEN];
    rng.fill_bytes(&mut k);
    k
}

pub(crate) fn random_iv<R: RngCore>(rng: &mut R) -> [u8; IV_LEN] {
    let mut iv = [0u8; IV_LEN];
    rng.fill_bytes(&mut iv);
    iv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn km_with_k0(k0: u16) -> KeyMaterial {
        let mut key = [0u8; 32];
        key[..2].copy_from_slice(&k0.to_le_bytes());
        KeyMaterial::new(key, [0; 16])
    }

    #[test]
    fn hamming_weight_examples() {
        assert_eq!(hamming_weight(0x0000), 0);
        assert_eq!(hamming_weight(0xffff), 16);
        // 1001 1001 0000 1111
        let by_loop = (0..16).filter(|b| 0x990fu16 >> b & 1 == 1).count() as u32;
        assert_eq!(hamming_weight(0x990f), by_loop);
        assert_eq!(by_loop, 8);
    }

    #[test]
    fn zero_key_noiseless_is_zero() {
        let sim = Simulator::new(LeakModel {
            noise_sigma: 0.0,
            ..LeakModel::default()
        })
        .unwrap();
        let t = sim.simulate_trace(&KeyMaterial::new([0; 32], [0; 16]), &mut trace_rng(1, 0));
        assert_eq!(t.len(), 64 + 8 * 160);
        assert!(t.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn hw_model_u_sample() {
        let sim = Simulator::new(LeakModel::hamming_weight(0.0)).unwrap();
        let t = sim.simulate_trace(&km_with_k0(1), &mut trace_rng(1, 0));
        // u = mul_x_inv(1) = 0xcc87 at step 0, offset 0.
        assert_eq!(t[64], 8.0);
        assert_eq!(t[64 + 16], 8.0, "mul_x_inv output");
        let leaky: usize = t.iter().filter(|&&s| s != 0.0).count();
        assert!(leaky > 0);
        assert!(t[..64].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn weights_reduce_to_hw_without_spread() {
        let sim = Simulator::new(LeakModel {
            weight_spread: 0.0,
            noise_sigma: 0.0,
            ..LeakModel::default()
        })
        .unwrap();
        for e in 0..38 {
            for k in 0..4 {
                assert_eq!(sim.leak_value(e, k, 0xf00f), 8.0);
            }
        }
    }

    #[test]
    fn write_events_follow_the_shift() {
        let key: [u8; 32] = core::array::from_fn(|i| (i * 7 + 1) as u8);
        let iv: [u8; 16] = core::array::from_fn(|i| (i * 3 + 2) as u8);
        let km = KeyMaterial::new(key, iv);
        let sim = Simulator::new(LeakModel::default()).unwrap();
        let vals = sim.event_values(&km);
        let mut st = CipherState::load(&km);
        for v in &vals {
            let s = st.lfsr_step();
            assert_eq!(v[0], s.u);
            assert_eq!(v[6 + 15], s.u);
            assert_eq!(v[22 + 15], s.v);
            assert_eq!(&v[6..22], &st.a);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let sim = Simulator::new(LeakModel::default()).unwrap();
        let km = km_with_k0(0x1234);
        let a = sim.simulate_trace(&km, &mut trace_rng(9, 3));
        let b = sim.simulate_trace(&km, &mut trace_rng(9, 3));
        let c = sim.simulate_trace(&km, &mut trace_rng(9, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn validation() {
        let mut m = LeakModel::hamming_weight(1.0);
        m.leak_offsets[1] = 0;
        assert!(Simulator::new(m).is_err());
        let mut m = LeakModel::hamming_weight(1.0);
        m.leak_offsets[5] = 32;
        assert!(Simulator::new(m).is_err());
        let mut m = LeakModel::hamming_weight(1.0);
        m.noise_sigma = -1.0;
        assert!(Simulator::new(m).is_err());
        let mut m = LeakModel::default();
        m.leak_offsets.pop();
        assert!(Simulator::new(m).is_err());
    }
}
