//! Fixed-vs-random Welch t-test with streaming, mergeable accumulators.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use snowv_ml::Scalar;

use crate::campaign::TraceSet;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 4.5;
const SHARD_ROWS: usize = 1024;

/// Running mean and sum of squared deviations per sample index.
#[derive(Clone, Debug, PartialEq)]
pub struct Welford<T> {
    pub n: u64,
    pub mean: Vec<T>,
    pub m2: Vec<T>,
}

impl<T: Scalar> Welford<T> {
    pub fn new(dim: usize) -> Self {
        Welford {
            n: 0,
            mean: vec![T::zero(); dim],
            m2: vec![T::zero(); dim],
        }
    }

    pub fn push(&mut self, x: &[f32]) {
        self.n += 1;
        let n = T::from_u64(self.n).expect("count");
        for ((m, s), &xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let xi = T::from_f32(xi).expect("f32");
            let d = xi - *m;
            *m += d / n;
            *s += d * (xi - *m);
        }
    }

    /// Combines two disjoint partial accumulations.
    pub fn merge(&mut self, other: &Welford<T>) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let na = T::from_u64(self.n).expect("count");
        let nb = T::from_u64(other.n).expect("count");
        let n = na + nb;
        for j in 0..self.mean.len() {
            let d = other.mean[j] - self.mean[j];
            self.mean[j] += d * nb / n;
            self.m2[j] += other.m2[j] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    /// Unbiased sample variance at index `j`.
    pub fn variance(&self, j: usize) -> T {
        if self.n < 2 {
            return T::zero();
        }
        self.m2[j] / T::from_u64(self.n - 1).expect("count")
    }
}

pub type Welford32 = Welford<f32>;
pub type Welford64 = Welford<f64>;

/// Per-group accumulators for one trace set.
#[derive(Clone, Debug)]
pub struct GroupStats<T> {
    pub fixed: Welford<T>,
    pub random: Welford<T>,
}

impl<T: Scalar> GroupStats<T> {
    pub fn new(dim: usize) -> Self {
        GroupStats {
            fixed: Welford::new(dim),
            random: Welford::new(dim),
        }
    }

    pub fn push(&mut self, x: &[f32], fixed: bool) {
        if fixed {
            self.fixed.push(x)
        } else {
            self.random.push(x)
        }
    }

    pub fn merge(&mut self, other: &GroupStats<T>) {
        self.fixed.merge(&other.fixed);
        self.random.merge(&other.random);
    }

    pub fn accumulate(ts: &TraceSet) -> Self {
        let mut g = GroupStats::new(ts.samples_per_trace());
        for (i, row) in ts.samples.rows().into_iter().enumerate() {
            g.push(row.as_slice().expect("contiguous"), ts.fixed[i]);
        }
        g
    }

    /// Sharded accumulation on the rayon pool. Equal to [`Self::accumulate`]
    /// up to floating-point reassociation.
    pub fn accumulate_parallel(ts: &TraceSet) -> Self {
        let dim = ts.samples_per_trace();
        let rows = ts.samples.as_slice().expect("contiguous");
        let n = ts.len();
        (0..n.div_ceil(SHARD_ROWS))
            .into_par_iter()
            .map(|shard| {
                let mut g = GroupStats::new(dim);
                for i in shard * SHARD_ROWS..((shard + 1) * SHARD_ROWS).min(n) {
                    g.push(&rows[i * dim..(i + 1) * dim], ts.fixed[i]);
                }
                g
            })
            .reduce(
                || GroupStats::new(dim),
                |mut a, b| {
                    a.merge(&b);
                    a
                },
            )
    }

    pub fn report(&self, threshold: f64) -> Result<TvlaReport> {
        let (n1, n2) = (self.fixed.n, self.random.n);
        if n1 < 2 || n2 < 2 {
            return Err(Error::InsufficientData(format!(
                "each TVLA group needs at least 2 traces, got {n1} fixed and {n2} random"
            )));
        }
        let t_values: Vec<f64> = (0..self.fixed.mean.len())
            .map(|j| {
                let diff = (self.fixed.mean[j] - self.random.mean[j]).to_f64_lossy();
                let se2 = self.fixed.variance(j).to_f64_lossy() / n1 as f64
                    + self.random.variance(j).to_f64_lossy() / n2 as f64;
                if se2 > 0.0 {
                    diff / se2.sqrt()
                } else if diff == 0.0 {
                    0.0
                } else {
                    diff.signum() * f64::INFINITY
                }
            })
            .collect();
        let leak_points = t_values
            .iter()
            .enumerate()
            .filter(|(_, t)| t.abs() > threshold)
            .map(|(j, _)| j)
            .collect();
        Ok(TvlaReport {
            t_values,
            threshold,
            leak_points,
            group_sizes: (n1, n2),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvlaReport {
    pub t_values: Vec<f64>,
    pub threshold: f64,
    /// Sorted indices with |t| above the threshold.
    pub leak_points: Vec<usize>,
    /// (fixed, random).
    pub group_sizes: (u64, u64),
}

impl TvlaReport {
    pub fn max_abs_t(&self) -> f64 {
        self.t_values.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    pub fn has_leaks(&self) -> bool {
        !self.leak_points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,t_value,is_leak")?;
        for (j, t) in self.t_values.iter().enumerate() {
            writeln!(w, "{j},{t},{}", u8::from(t.abs() > self.threshold))?;
        }
        w.flush()
    }

    pub fn summary(&self) -> String {
        format!(
            "max |t| = {:.3}, {} of {} points above {} (fixed {}, random {})",
            self.max_abs_t(),
            self.leak_points.len(),
            self.t_values.len(),
            self.threshold,
            self.group_sizes.0,
            self.group_sizes.1
        )
    }
}

/// Welch t per sample between the fixed and random groups of `ts`.
pub fn welch_t<T: Scalar>(ts: &TraceSet, threshold: f64) -> Result<TvlaReport> {
    GroupStats::<T>::accumulate_parallel(ts).report(threshold)
}
