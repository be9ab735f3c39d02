//! Majority voting over traces and minimum traces to disclosure.

use serde::Serialize;

use crate::{Error, Result};

pub const MTD_TARGET: f64 = 0.9999;
pub const MTD_MAX_TRACES: usize = 200_001;

/// MTD figures quoted for the hardware attack, with the single-trace
/// accuracies reported next to them (none for CPA+LDA).
pub const REPORTED_MTD: [(&str, Option<f64>, usize); 3] =
    [("CPA+LDA", None, 50), ("LDA", Some(0.57455), 12), ("FCN", Some(0.79), 8)];

/// Natural log of k! for k = 0..=n.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().fold(f64::NEG_INFINITY, |m, &t| m.max(t));
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn vote_prob_with(p: f64, n: usize, lf: &[f64]) -> f64 {
    let ln_pmf = |k: usize| lf[n] - lf[k] - lf[n - k] + xlny(k as f64, p) + xlny((n - k) as f64, 1.0 - p);
    if p >= 0.5 {
        // The failing tail is the small one; summing it keeps 1 - tail exact
        // to the last ulp and monotone in p.
        let tail = log_sum_exp((0..=n / 2).map(ln_pmf)).exp();
        (1.0 - tail).max(0.0)
    } else {
        log_sum_exp((n.div_ceil(2)..=n).map(ln_pmf)).exp().min(1.0)
    }
}

/// Probability that more than half of `n` independent votes are correct when
/// each is correct with probability `p`. `n` must be odd.
pub fn majority_vote_prob(p: f64, n: usize) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::InsufficientData(format!("vote count must be odd, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Degenerate(format!("accuracy {p} outside [0, 1]")));
    }
    Ok(vote_prob_with(p, n, &ln_factorials(n)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mtd {
    pub traces: usize,
    /// (n, probability) for every odd n up to `traces`.
    pub curve: Vec<(usize, f64)>,
}

/// Smallest odd n whose majority-vote success reaches `target`.
pub fn mtd(p: f64, target: f64) -> Result<Mtd> {
    mtd_bounded(p, target, MTD_MAX_TRACES)
}

pub fn mtd_bounded(p: f64, target: f64, max_traces: usize) -> Result<Mtd> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::NoConvergence { p });
    }
    let lf = ln_factorials(max_traces);
    let q = 1.0 - p;
    let ln_step = xlny(1.0, p) + xlny(1.0, q);
    let mut curve = Vec::new();
    // Failure tail at n = 1. Going from n = 2m + 1 to n + 2 removes
    // C(n, m) (pq)^(m+1) (p - q), so the scan stays linear in n.
    let mut tail = q;
    for n in (1..=max_traces).step_by(2) {
        let mut prob = 1.0 - tail;
        if prob >= target - 1e-9 {
            // Decide on the direct sum, not the running difference.
            prob = vote_prob_with(p, n, &lf);
        }
        curve.push((n, prob));
        if prob >= target {
            return Ok(Mtd { traces: n, curve });
        }
        let m = (n - 1) / 2;
        if n + 2 <= max_traces && q > 0.0 {
            let ln_delta = lf[n] - lf[m] - lf[n - m] + (m + 1) as f64 * ln_step + (p - q).ln();
            tail = (tail - ln_delta.exp()).max(0.0);
        }
    }
    Err(Error::NoConvergence { p })
}

/// Rounds a trace budget up to the next odd count.
pub fn odd_at_least(n: usize) -> usize {
    n | 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Vote {
    pub value: u8,
    pub count: usize,
    pub runner_up: usize,
    pub total: usize,
}

impl Vote {
    /// Lead of the winner over the runner-up as a fraction of all votes.
    pub fn margin(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (self.count - self.runner_up) as f64 / self.total as f64
        }
    }
}

/// Most frequent byte; ties go to the smallest value.
pub fn plurality(values: &[u8]) -> Vote {
    let mut counts = [0usize; 256];
    for &v in values {
        counts[v as usize] += 1;
    }
    let mut best = 0;
    for v in 1..256 {
        if counts[v] > counts[best] {
            best = v;
        }
    }
    let runner_up = (0..256)
        .filter(|&v| v != best)
        .map(|v| counts[v])
        .max()
        .unwrap_or(0);
    Vote {
        value: best as u8,
        count: counts[best],
        runner_up,
        total: values.len(),
    }
}
