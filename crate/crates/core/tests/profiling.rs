use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snowv_sca::attack::kvc::kvc_select;
use snowv_sca::attack::profile::target_values;
use snowv_sca::attack::{
    derive_label, labels, run_profiling_attack, ByteHalf, Lfsr, Method, Preprocess, ProfileConfig, TargetSpec,
    TargetWord,
};
use snowv_sca::campaign::{Campaign, IvPolicy, KeyPolicy, TraceSet};
use snowv_sca::cipher::KeyMaterial;
use snowv_sca::leakage::{LeakModel, Simulator};

fn profiling(model: LeakModel, n: usize, seed: u64) -> TraceSet {
    Campaign {
        n,
        key_policy: KeyPolicy::Fresh,
        iv_policy: IvPolicy::Random,
        seed,
        store_keys: true,
    }
    .simulate(&Simulator::new(model).unwrap())
}

#[test]
fn kvc_finds_the_leak_offset_on_noiseless_traces() {
    let model = LeakModel::hamming_weight(0.0);
    let sim = Simulator::new(model.clone()).unwrap();
    let ts = profiling(model, 300, 1);
    for (lfsr, event) in [(Lfsr::A, 0), (Lfsr::B, 1)] {
        for step in [0u8, 3, 7] {
            let t = TargetSpec::feedback(lfsr, step, ByteHalf::Low);
            let values = target_values(&ts, &t).unwrap();
            let sel = kvc_select(ts.samples.view(), &values, 1).unwrap();
            let offset = sim.event_samples(step as usize, event).start;
            assert_eq!(sel.selected, vec![offset]);
            assert!((sel.correlations[offset].abs() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn kvc_noise_correlations_stay_below_bound() {
    // Under the null, sqrt(n)*rho is close to N(0,1); five sigma over 50
    // columns is almost never crossed.
    let (n, d, runs) = (200, 50, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut over = 0;
    for _ in 0..runs {
        let samples = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0f32..1.0));
        let values: Vec<u16> = (0..n).map(|_| rng.gen()).collect();
        let sel = kvc_select(samples.view(), &values, 1).unwrap();
        let max = sel.correlations.iter().fold(0f64, |m, c| m.max(c.abs()));
        over += usize::from(max >= 5.0 / (n as f64).sqrt());
    }
    assert!(over <= runs / 100, "{over} runs crossed the bound");
}

/// Second transcription of the register load and clock, written from the
/// field definition with carry-less multiplication.
fn transcribed_word(km: &KeyMaterial, spec: &TargetSpec) -> u16 {
    fn gf_mul(x: u16, y: u16, poly: u16) -> u16 {
        let mut acc = 0u32;
        for i in 0..16 {
            if y >> i & 1 == 1 {
                acc ^= u32::from(x) << i;
            }
        }
        for bit in (16..32).rev() {
            if acc >> bit & 1 == 1 {
                acc ^= (0x1_0000 | u32::from(poly)) << (bit - 16);
            }
        }
        acc as u16
    }
    let word = |b: &[u8], i: usize| u16::from(b[2 * i]) | u16::from(b[2 * i + 1]) << 8;
    let mut a: Vec<u16> = (0..8).map(|i| word(&km.iv, i)).chain((0..8).map(|i| word(&km.key, i))).collect();
    let mut b: Vec<u16> = vec![0; 8].into_iter().chain((8..16).map(|i| word(&km.key, i))).collect();
    let inv_a = (1..=u16::MAX).find(|&c| gf_mul(c, 2, 0x990f) == 1).unwrap();
    let inv_b = (1..=u16::MAX).find(|&c| gf_mul(c, 2, 0xc963) == 1).unwrap();
    let clock = |a: &mut Vec<u16>, b: &mut Vec<u16>| {
        let u = gf_mul(a[0], 2, 0x990f) ^ a[1] ^ gf_mul(a[8], inv_a, 0x990f) ^ b[0];
        let v = gf_mul(b[0], 2, 0xc963) ^ b[3] ^ gf_mul(b[8], inv_b, 0xc963) ^ a[0];
        a.remove(0);
        a.push(u);
        b.remove(0);
        b.push(v);
        (u, v)
    };
    for _ in 0..spec.step {
        clock(&mut a, &mut b);
    }
    match spec.word {
        TargetWord::State { lfsr: Lfsr::A, index } => a[index as usize],
        TargetWord::State { lfsr: Lfsr::B, index } => b[index as usize],
        TargetWord::Feedback { lfsr } => {
            let (u, v) = clock(&mut a, &mut b);
            if lfsr == Lfsr::A {
                u
            } else {
                v
            }
        }
    }
}

#[test]
fn labels_match_independent_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let km = KeyMaterial::new(rng.gen(), rng.gen());
        let lfsr = if rng.gen() { Lfsr::A } else { Lfsr::B };
        let word = if rng.gen() {
            TargetWord::Feedback { lfsr }
        } else {
            TargetWord::State {
                lfsr,
                index: rng.gen_range(0..16),
            }
        };
        let spec = TargetSpec {
            word,
            step: rng.gen_range(0..8),
            bits: [1, 2, 4, 8][rng.gen_range(0..4)],
            half: if rng.gen() { ByteHalf::Low } else { ByteHalf::High },
        };
        let w = transcribed_word(&km, &spec);
        let byte = if spec.half == ByteHalf::Low { w & 0xff } else { w >> 8 };
        assert_eq!(derive_label(&km, &spec), (byte as usize) & ((1 << spec.bits) - 1), "{spec}");
    }
}

#[test]
fn fitted_pipeline_ignores_the_test_split() {
    let model = LeakModel {
        noise_sigma: 1.0,
        ..LeakModel::default()
    };
    let train = profiling(model.clone(), 1500, 4);
    let val = profiling(model.clone(), 200, 5);
    let test_a = profiling(model.clone(), 200, 6);
    let test_b = profiling(model, 300, 7);
    let t = TargetSpec {
        bits: 4,
        ..TargetSpec::default()
    };
    let cfg = ProfileConfig {
        top_k: 16,
        ..Default::default()
    };
    for pre in [Preprocess::None, Preprocess::Pca] {
        let a = run_profiling_attack::<f64>(&train, &val, &test_a, &t, Method::Lda, pre, &cfg).unwrap();
        let b = run_profiling_attack::<f64>(&train, &val, &test_b, &t, Method::Lda, pre, &cfg).unwrap();
        assert_eq!(a.classifier, b.classifier);
        assert_eq!(a.train_accuracy, b.train_accuracy);
    }
}

#[test]
fn noiseless_lda_separates_one_bit_perfectly() {
    let model = LeakModel {
        noise_sigma: 0.0,
        ..LeakModel::default()
    };
    let train = profiling(model.clone(), 2000, 8);
    let test = profiling(model, 500, 9);
    let t = TargetSpec {
        bits: 1,
        ..TargetSpec::feedback(Lfsr::A, 0, ByteHalf::Low)
    };
    let cfg = ProfileConfig {
        top_k: 256,
        shrinkage: 1e-6,
        ..Default::default()
    };
    let r = run_profiling_attack::<f64>(&train, &TraceSet::empty(0, true), &test, &t, Method::Lda, Preprocess::None, &cfg)
        .unwrap();
    assert_eq!(r.test_accuracy, 1.0);
    assert_eq!(labels(&test, &t).unwrap().len(), 500);
}
