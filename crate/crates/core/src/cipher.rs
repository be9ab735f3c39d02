//! Scalar SNOW-V: GF(2^16) tap arithmetic, the two LFSRs, the FSM with its
//! zero-key AES rounds, initialization and keystream generation.
//!
//! Word and byte order follow the reference design: key bytes `2i, 2i+1`
//! form `k_i` little-endian, the IV likewise, and the 128-bit taps pack
//! `b8` / `a0` into their least significant word.

use std::fmt;

use crate::error::Error;

/// Feedback constant of `mul_x` on LFSR-A (root of g_A).
pub const ALPHA: u16 = 0x990f;
/// Feedback constant of `mul_x_inv` on LFSR-A.
pub const ALPHA_INV: u16 = 0xcc87;
/// Feedback constant of `mul_x` on LFSR-B (root of g_B).
pub const BETA: u16 = 0xc963;
/// Feedback constant of `mul_x_inv` on LFSR-B.
pub const BETA_INV: u16 = 0xe4b1;

/// Byte permutation applied to R1: output byte `i` is input byte `SIGMA[i]`.
pub const SIGMA: [usize; 16] = [0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15];

pub const KEY_LEN: usize = 32;
pub const IV_LEN: usize = 16;

/// Multiplication by the field root: shift left, reduce with `c` on carry-out.
#[inline]
pub const fn mul_x(v: u16, c: u16) -> u16 {
    if v & 0x8000 != 0 {
        (v << 1) ^ c
    } else {
        v << 1
    }
}

/// Multiplication by the inverse root: shift right, fold in `d` when bit 0 was set.
#[inline]
pub const fn mul_x_inv(v: u16, d: u16) -> u16 {
    if v & 0x0001 != 0 {
        (v >> 1) ^ d
    } else {
        v >> 1
    }
}

/// A 128-bit FSM register or tap, least significant byte first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Block128(pub [u8; 16]);

impl Block128 {
    pub const ZERO: Block128 = Block128([0; 16]);

    /// Packs eight 16-bit words, `words[0]` least significant.
    pub fn from_words(words: &[u16; 8]) -> Self {
        let mut out = [0u8; 16];
        for (chunk, w) in out.chunks_exact_mut(2).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Block128(out)
    }

    pub fn lanes(&self) -> [u32; 4] {
        let mut lanes = [0u32; 4];
        for (lane, chunk) in lanes.iter_mut().zip(self.0.chunks_exact(4)) {
            *lane = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        lanes
    }

    pub fn from_lanes(lanes: [u32; 4]) -> Self {
        let mut out = [0u8; 16];
        for (chunk, lane) in out.chunks_exact_mut(4).zip(lanes) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        Block128(out)
    }

    pub fn xor(&self, other: &Block128) -> Block128 {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0) {
            *o ^= b;
        }
        Block128(out)
    }
}

impl fmt::Debug for Block128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block128(")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Output byte `i` is input byte `SIGMA[i]`; a transpose of the 4x4 byte matrix.
pub fn sigma_permute(block: &Block128) -> Block128 {
    let mut out = [0u8; 16];
    for (o, &src) in out.iter_mut().zip(SIGMA.iter()) {
        *o = block.0[src];
    }
    Block128(out)
}

/// Lane-wise addition modulo 2^32 on the four little-endian 32-bit words.
pub fn add32x4(x: &Block128, y: &Block128) -> Block128 {
    let (x, y) = (x.lanes(), y.lanes());
    Block128::from_lanes([
        x[0].wrapping_add(y[0]),
        x[1].wrapping_add(y[1]),
        x[2].wrapping_add(y[2]),
        x[3].wrapping_add(y[3]),
    ])
}

#[rustfmt::skip]
const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

#[inline]
fn xtime(b: u8) -> u8 {
    (b << 1) ^ if b & 0x80 != 0 { 0x1b } else { 0 }
}

/// One AES encryption round (SubBytes, ShiftRows, MixColumns) with an
/// all-zero round key. The state is column-major: byte `4c + r` is row `r`
/// of column `c`.
pub fn aes_round_zero_key(block: &Block128) -> Block128 {
    let mut s = [0u8; 16];
    for c in 0..4 {
        for r in 0..4 {
            // ShiftRows rotates row r left by r columns.
            s[4 * c + r] = SBOX[block.0[4 * ((c + r) % 4) + r] as usize];
        }
    }
    let mut out = [0u8; 16];
    for c in 0..4 {
        let col = [s[4 * c], s[4 * c + 1], s[4 * c + 2], s[4 * c + 3]];
        let all = col[0] ^ col[1] ^ col[2] ^ col[3];
        for r in 0..4 {
            out[4 * c + r] = col[r] ^ all ^ xtime(col[r] ^ col[(r + 1) % 4]);
        }
    }
    Block128(out)
}

/// 256-bit key and 128-bit IV as raw octets.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyMaterial {
    pub key: [u8; KEY_LEN],
    pub iv: [u8; IV_LEN],
}

impl KeyMaterial {
    pub fn new(key: [u8; KEY_LEN], iv: [u8; IV_LEN]) -> Self {
        KeyMaterial { key, iv }
    }

    /// Builds key material from slices, rejecting wrong lengths.
    pub fn from_slices(key: &[u8], iv: &[u8]) -> Result<Self, Error> {
        let key: [u8; KEY_LEN] = key.try_into().map_err(|_| Error::InvalidLength {
            what: "key",
            expected: KEY_LEN,
            actual: key.len(),
        })?;
        let iv: [u8; IV_LEN] = iv.try_into().map_err(|_| Error::InvalidLength {
            what: "iv",
            expected: IV_LEN,
            actual: iv.len(),
        })?;
        Ok(KeyMaterial { key, iv })
    }

    /// Key words k0..k15.
    pub fn key_words(&self) -> [u16; 16] {
        words(&self.key)
    }

    /// IV words iv0..iv7.
    pub fn iv_words(&self) -> [u16; 8] {
        words(&self.iv)
    }

    pub fn from_words(key: &[u16; 16], iv: &[u16; 8]) -> Self {
        let mut k = [0u8; KEY_LEN];
        for (chunk, w) in k.chunks_exact_mut(2).zip(key) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut v = [0u8; IV_LEN];
        for (chunk, w) in v.chunks_exact_mut(2).zip(iv) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        KeyMaterial { key: k, iv: v }
    }
}

impl fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyMaterial")
            .field("key", &hex(&self.key))
            .field("iv", &hex(&self.iv))
            .finish()
    }
}

fn words<const N: usize>(bytes: &[u8]) -> [u16; N] {
    let mut out = [0u16; N];
    for (w, chunk) in out.iter_mut().zip(bytes.chunks_exact(2)) {
        *w = u16::from_le_bytes([chunk[0], chunk[1]]);
    }
    out
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The two LFSRs and the three FSM registers.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct CipherState {
    pub a: [u16; 16],
    pub b: [u16; 16],
    pub r1: Block128,
    pub r2: Block128,
    pub r3: Block128,
}

/// The six values computed by one LFSR step, in the order the simulator leaks them.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct StepIntermediates {
    /// New a15.
    pub u: u16,
    /// New b15.
    pub v: u16,
    /// mul_x(a0, ALPHA).
    pub mulx_a: u16,
    /// mul_x(b0, BETA).
    pub mulx_b: u16,
    /// mul_x_inv(a8, ALPHA_INV).
    pub mulx_inv_a: u16,
    /// mul_x_inv(b8, BETA_INV).
    pub mulx_inv_b: u16,
}

impl CipherState {
    /// Loads key and IV into the LFSRs; R1 = R2 = R3 = 0. No rounds are run.
    pub fn load(km: &KeyMaterial) -> Self {
        let k = km.key_words();
        let iv = km.iv_words();
        let mut a = [0u16; 16];
        let mut b = [0u16; 16];
        a[..8].copy_from_slice(&iv);
        a[8..].copy_from_slice(&k[..8]);
        b[8..].copy_from_slice(&k[8..]);
        CipherState {
            a,
            b,
            ..Default::default()
        }
    }

    /// Full initialization: key/IV load followed by the 16 mixing rounds.
    pub fn init(km: &KeyMaterial) -> Self {
        let mut st = Self::load(km);
        let (k_lo, k_hi) = km.key.split_at(16);
        let k_lo = Block128(k_lo.try_into().expect("16 bytes"));
        let k_hi = Block128(k_hi.try_into().expect("16 bytes"));
        for round in 1..=16 {
            let z = st.next_block();
            let z = z.0;
            for (i, w) in st.a[8..].iter_mut().enumerate() {
                *w ^= u16::from_le_bytes([z[2 * i], z[2 * i + 1]]);
            }
            if round == 15 {
                st.r1 = st.r1.xor(&k_lo);
            }
            if round == 16 {
                st.r1 = st.r1.xor(&k_hi);
            }
        }
        st
    }

    /// Initializes either fully or, with `stop_after_load`, only loads key and IV.
    pub fn init_with(km: &KeyMaterial, stop_after_load: bool) -> Self {
        if stop_after_load {
            Self::load(km)
        } else {
            Self::init(km)
        }
    }

    /// One LFSR clock. Returns the intermediates so a simulator can leak them.
    pub fn lfsr_step(&mut self) -> StepIntermediates {
        let a = &self.a;
        let b = &self.b;
        let mulx_a = mul_x(a[0], ALPHA);
        let mulx_b = mul_x(b[0], BETA);
        let mulx_inv_a = mul_x_inv(a[8], ALPHA_INV);
        let mulx_inv_b = mul_x_inv(b[8], BETA_INV);
        let u = mulx_a ^ a[1] ^ mulx_inv_a ^ b[0];
        let v = mulx_b ^ b[3] ^ mulx_inv_b ^ a[0];
        self.a.copy_within(1.., 0);
        self.b.copy_within(1.., 0);
        self.a[15] = u;
        self.b[15] = v;
        StepIntermediates {
            u,
            v,
            mulx_a,
            mulx_b,
            mulx_inv_a,
            mulx_inv_b,
        }
    }

    /// Eight LFSR clocks; the (u, v) pairs in order.
    pub fn lfsr_update8(&mut self) -> [(u16, u16); 8] {
        let mut out = [(0, 0); 8];
        for o in out.iter_mut() {
            let s = self.lfsr_step();
            *o = (s.u, s.v);
        }
        out
    }

    /// T1 = (b15..b8), b8 least significant.
    pub fn t1(&self) -> Block128 {
        Block128::from_words(self.b[8..].try_into().expect("8 words"))
    }

    /// T2 = (a7..a0), a0 least significant.
    pub fn t2(&self) -> Block128 {
        Block128::from_words(self.a[..8].try_into().expect("8 words"))
    }

    /// Emits z = (R1 ⊞ T1) ⊕ R2 and advances the FSM.
    pub fn fsm_update_and_output(&mut self, t1: &Block128, t2: &Block128) -> Block128 {
        let z = add32x4(&self.r1, t1).xor(&self.r2);
        let tmp = add32x4(&self.r2, &self.r3.xor(t2));
        self.r3 = aes_round_zero_key(&self.r2);
        self.r2 = aes_round_zero_key(&self.r1);
        self.r1 = sigma_permute(&tmp);
        z
    }

    /// Next 128-bit keystream block: output and FSM update from the current
    /// taps, then eight LFSR clocks.
    pub fn next_block(&mut self) -> Block128 {
        let (t1, t2) = (self.t1(), self.t2());
        let z = self.fsm_update_and_output(&t1, &t2);
        self.lfsr_update8();
        z
    }
}

/// Keystream generator over an initialized state.
#[derive(Clone, Debug)]
pub struct SnowV {
    state: CipherState,
}

impl SnowV {
    pub fn new(km: &KeyMaterial) -> Self {
        SnowV {
            state: CipherState::init(km),
        }
    }

    pub fn next_block(&mut self) -> [u8; 16] {
        self.state.next_block().0
    }

    pub fn keystream(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(16) {
            let z = self.next_block();
            chunk.copy_from_slice(&z[..chunk.len()]);
        }
    }

    pub fn state(&self) -> &CipherState {
        &self.state
    }
}
