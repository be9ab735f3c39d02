//! Inverting the feedback recurrences for the unknown a8 / b8 term.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cipher::{mul_x, mul_x_inv, ALPHA, ALPHA_INV, BETA, BETA_INV};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recurrence {
    /// u = mul_x(a0) ^ a1 ^ mul_x_inv(a8) ^ b0
    A,
    /// v = mul_x(b0) ^ b3 ^ mul_x_inv(b8) ^ a0
    B,
}

struct Tables {
    inv_a: Vec<u16>,
    inv_b: Vec<u16>,
}

fn invert(d: u16) -> Vec<u16> {
    let mut t = vec![0u16; 1 << 16];
    for x in 0..=u16::MAX {
        t[mul_x_inv(x, d) as usize] = x;
    }
    debug_assert!(
        (0..=u16::MAX).all(|x| t[mul_x_inv(x, d) as usize] == x),
        "mul_x_inv is not a bijection"
    );
    t
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| Tables {
        inv_a: invert(ALPHA_INV),
        inv_b: invert(BETA_INV),
    })
}

/// Strips the known terms from a feedback word, leaving mul_x_inv(a8) (or
/// of b8). Known terms are given in recurrence order: (a0, a1, b0) for A,
/// (b0, b3, a0) for B. Each output byte depends only on the same byte of
/// `out`.
pub fn unmask(out: u16, known: [u16; 3], which: Recurrence) -> u16 {
    match which {
        Recurrence::A => {
            let [a0, a1, b0] = known;
            out ^ mul_x(a0, ALPHA) ^ a1 ^ b0
        }
        Recurrence::B => {
            let [b0, b3, a0] = known;
            out ^ mul_x(b0, BETA) ^ b3 ^ a0
        }
    }
}

/// Inverts mul_x_inv for the given register.
pub fn invert_masked(z: u16, which: Recurrence) -> u16 {
    let t = tables();
    match which {
        Recurrence::A => t.inv_a[z as usize],
        Recurrence::B => t.inv_b[z as usize],
    }
}

/// Recovers the a8 (or b8) term from the feedback word and the three known
/// terms.
pub fn solve_word(out: u16, known: [u16; 3], which: Recurrence) -> u16 {
    invert_masked(unmask(out, known, which), which)
}
