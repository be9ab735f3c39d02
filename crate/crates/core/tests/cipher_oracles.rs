use aes::cipher::generic_array::GenericArray;
use num_bigint::BigUint;
use proptest::prelude::*;
use snowv_sca::cipher::{
    add32x4, aes_round_zero_key, mul_x, Block128, CipherState, KeyMaterial, SnowV, ALPHA, ALPHA_INV, BETA,
    BETA_INV,
};

fn reference_keystream(key: &[u8; 32], iv: &[u8; 16], blocks: usize) -> Vec<u8> {
    let mut c = snowv::SnowV::new(key, iv);
    let mut out = Vec::with_capacity(16 * blocks);
    for _ in 0..blocks {
        let mut b = [0u8; 16];
        c.write_keystream_block(&mut b).unwrap();
        out.extend_from_slice(&b);
    }
    out
}

fn ours(key: &[u8; 32], iv: &[u8; 16], blocks: usize) -> Vec<u8> {
    let mut out = vec![0u8; 16 * blocks];
    SnowV::new(&KeyMaterial::new(*key, *iv)).keystream(&mut out);
    out
}

#[test]
fn structured_keys_match_reference_crate() {
    let cases: [([u8; 32], [u8; 16]); 3] = [
        ([0; 32], [0; 16]),
        ([0xff; 32], [0xff; 16]),
        (core::array::from_fn(|i| 0x50 + i as u8), core::array::from_fn(|i| 0x01 + i as u8)),
    ];
    for (key, iv) in cases {
        assert_eq!(ours(&key, &iv, 64), reference_keystream(&key, &iv, 64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn keystream_matches_reference_crate(key in any::<[u8; 32]>(), iv in any::<[u8; 16]>()) {
        prop_assert_eq!(ours(&key, &iv, 8), reference_keystream(&key, &iv, 8));
    }

    #[test]
    fn aes_round_matches_reference(block in any::<[u8; 16]>()) {
        let mut b = GenericArray::clone_from_slice(&block);
        aes::hazmat::cipher_round(&mut b, &GenericArray::default());
        let got = aes_round_zero_key(&Block128(block));
        prop_assert_eq!(got.0.as_slice(), b.as_slice());
    }

    #[test]
    fn add32x4_matches_bigint(x in any::<[u8; 16]>(), y in any::<[u8; 16]>()) {
        let modulus = BigUint::from(1u64 << 32);
        let got = add32x4(&Block128(x), &Block128(y));
        for lane in 0..4 {
            let a = BigUint::from_bytes_le(&x[4 * lane..4 * lane + 4]);
            let b = BigUint::from_bytes_le(&y[4 * lane..4 * lane + 4]);
            let mut want = ((a + b) % &modulus).to_bytes_le();
            want.resize(4, 0);
            prop_assert_eq!(&got.0[4 * lane..4 * lane + 4], want.as_slice());
        }
    }

    #[test]
    fn lfsr_step_matches_transcription(a in any::<[u16; 16]>(), b in any::<[u16; 16]>()) {
        // Field multiplication written as carry-less product reduced by the
        // defining polynomial, independent of the shift-and-xor helpers.
        fn gf_mul(x: u16, y: u16, poly: u16) -> u16 {
            let mut acc: u32 = 0;
            for i in 0..16 {
                if y >> i & 1 == 1 {
                    acc ^= u32::from(x) << i;
                }
            }
            let full = 0x1_0000u32 | u32::from(poly);
            for bit in (16..32).rev() {
                if acc >> bit & 1 == 1 {
                    acc ^= full << (bit - 16);
                }
            }
            acc as u16
        }
        fn gf_inv_x(poly: u16) -> u16 {
            (1..=u16::MAX).find(|&c| gf_mul(c, 2, poly) == 1).unwrap()
        }
        let mut st = CipherState { a, b, ..Default::default() };
        let s = st.lfsr_step();
        let ia = gf_inv_x(ALPHA);
        let ib = gf_inv_x(BETA);
        let u = gf_mul(a[0], 2, ALPHA) ^ a[1] ^ gf_mul(a[8], ia, ALPHA) ^ b[0];
        let v = gf_mul(b[0], 2, BETA) ^ b[3] ^ gf_mul(b[8], ib, BETA) ^ a[0];
        prop_assert_eq!((s.u, s.v), (u, v));
        prop_assert_eq!(st.a[..15].to_vec(), a[1..].to_vec());
        prop_assert_eq!(st.b[..15].to_vec(), b[1..].to_vec());
        prop_assert_eq!((st.a[15], st.b[15]), (u, v));
        prop_assert_eq!(s.mulx_a, mul_x(a[0], ALPHA));
    }
}

#[test]
fn inverse_constants_are_inverses_of_x() {
    for (c, d) in [(ALPHA, ALPHA_INV), (BETA, BETA_INV)] {
        for v in [1u16, 0x8000, 0x1234, 0xffff] {
            assert_eq!(snowv_sca::cipher::mul_x_inv(mul_x(v, c), d), v);
        }
    }
}

#[test]
fn replay_is_deterministic() {
    let km = KeyMaterial::new([0x5a; 32], [0xc3; 16]);
    let mut a = SnowV::new(&km);
    let mut b = SnowV::new(&km);
    for _ in 0..100 {
        assert_eq!(a.next_block(), b.next_block());
    }
}
