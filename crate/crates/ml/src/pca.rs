//! Principal component analysis on the sample covariance.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::io::{Reader, Writer, KIND_PCA};
use crate::linalg::{column_means, symmetric_eigen};
use crate::{MlError, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Array1<T>,
    /// k x d, one orthonormal principal direction per row.
    pub components: Array2<T>,
    /// Fraction of total variance carried by each kept component.
    pub explained_ratio: Array1<T>,
}

impl<T: Scalar> PcaModel<T> {
    /// Fits on the rows of `x`, keeping the fewest leading components that
    /// reach `target_variance`, capped at `max_components`, `n - 1` and `d`.
    pub fn fit(x: ArrayView2<T>, target_variance: f64, max_components: usize) -> Result<Self> {
        let (n, d) = x.dim();
        if n < 2 {
            return Err(MlError::InsufficientData { needed: 2, got: n });
        }
        if !(0.0..=1.0).contains(&target_variance) {
            return Err(MlError::InvalidConfig(format!(
                "target variance {target_variance} outside [0, 1]"
            )));
        }
        let mean = column_means(x);
        let centered = &x - &mean;
        let cov = centered.t().dot(&centered) / T::from_usize(n - 1).expect("n");
        let eig = symmetric_eigen(cov.view())?;

        let variances: Vec<T> = eig.values.iter().map(|&v| v.max(T::zero())).collect();
        let total: T = variances.iter().copied().sum();
        let ratios: Vec<T> = if total > T::zero() {
            variances.iter().map(|&v| v / total).collect()
        } else {
            vec![T::zero(); d]
        };

        let mut k = 0;
        let mut acc = 0.0;
        let target = target_variance - 1e-12;
        while k < d && acc < target {
            acc += ratios[k].to_f64_lossy();
            k += 1;
        }
        let k = k.max(1).min(max_components.max(1)).min(n - 1).min(d);

        let components = eig.vectors.slice(s![.., ..k]).t().to_owned();
        let explained_ratio = Array1::from_iter(ratios[..k].iter().copied());
        Ok(PcaModel {
            mean,
            components,
            explained_ratio,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Projects centered rows onto the components: n x k.
    pub fn transform(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_dim() {
            return Err(MlError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok((&x - &self.mean).dot(&self.components.t()))
    }

    /// Maps projected rows back to the input space.
    pub fn inverse_transform(&self, z: ArrayView2<T>) -> Array2<T> {
        z.dot(&self.components) + &self.mean.view().insert_axis(Axis(0))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header::<T>(KIND_PCA);
        self.write_body(&mut w);
        w.finish()
    }

    pub fn write_body(&self, w: &mut Writer) {
        w.array1(&self.mean);
        w.array2(&self.components);
        w.array1(&self.explained_ratio);
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, kind) = Reader::header::<T>(buf)?;
        if kind != KIND_PCA {
            return Err(r.error("not a PCA model"));
        }
        let m = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub fn read_body(r: &mut Reader) -> Result<Self> {
        let mean = r.array1()?;
        let components: Array2<T> = r.array2()?;
        let explained_ratio: Array1<T> = r.array1()?;
        if components.ncols() != mean.len() || explained_ratio.len() != components.nrows() {
            return Err(r.error("inconsistent PCA dimensions"));
        }
        Ok(PcaModel {
            mean,
            components,
            explained_ratio,
        })
    }
}
