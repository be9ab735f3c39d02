//! Known-value correlation: point-of-interest selection by Pearson
//! correlation between each sample and the Hamming weight of a known value.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KvcSelection {
    pub correlations: Vec<f64>,
    /// Ascending sample indices.
    pub selected: Vec<usize>,
    pub top_k: usize,
}

pub fn pearson_columns(samples: ArrayView2<f32>, x: &[f64]) -> Vec<f64> {
    let n = samples.nrows() as f64;
    let d = samples.ncols();
    let mean_x = x.iter().sum::<f64>() / n;
    let mut sy = vec![0f64; d];
    let mut syy = vec![0f64; d];
    let mut shy = vec![0f64; d];
    let mut shh = 0.0;
    for (row, &xi) in samples.rows().into_iter().zip(x) {
        let h = xi - mean_x;
        shh += h * h;
        for (j, &v) in row.iter().enumerate() {
            let v = v as f64;
            sy[j] += v;
            syy[j] += v * v;
            shy[j] += h * v;
        }
    }
    (0..d)
        .map(|j| {
            let var_y = syy[j] - sy[j] * sy[j] / n;
            if var_y <= 0.0 || shh <= 0.0 {
                0.0
            } else {
                (shy[j] / (shh.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

/// Top `top_k` samples by |ρ| against HW(value); ties go to the lower index.
pub fn kvc_select(samples: ArrayView2<f32>, values: &[u16], top_k: usize) -> Result<KvcSelection> {
    let n = samples.nrows();
    if values.len() != n {
        return Err(Error::Incompatible(format!("{} values for {n} traces", values.len())));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!("KVC needs at least 3 traces, got {n}")));
    }
    let hw: Vec<f64> = values.iter().map(|v| v.count_ones() as f64).collect();
    if hw.iter().all(|&h| h == hw[0]) {
        return Err(Error::Degenerate("known values have constant Hamming weight".into()));
    }
    let correlations = pearson_columns(samples, &hw);
    let mut order: Vec<usize> = (0..correlations.len()).collect();
    order.sort_by(|&i, &j| {
        correlations[j]
            .abs()
            .partial_cmp(&correlations[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let top_k = top_k.min(order.len());
    let mut selected = order[..top_k].to_vec();
    selected.sort_unstable();
    Ok(KvcSelection {
        correlations,
        selected,
        top_k,
    })
}
