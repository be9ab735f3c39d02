//! Linear discriminant analysis with a shared, shrinkage-regularized
//! covariance.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::io::{Reader, Writer, KIND_LDA};
use crate::linalg::{cholesky, cholesky_solve};
use crate::{MlError, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel<T> {
    /// C x d.
    pub class_means: Array2<T>,
    /// Lower Cholesky factor of the regularized pooled covariance.
    pub cov_factor: Array2<T>,
    pub priors: Array1<T>,
    pub shrinkage: T,
    coef: Array2<T>,
    bias: Array1<T>,
}

impl<T: Scalar> LdaModel<T> {
    /// Fits class means, empirical priors and the pooled within-class
    /// covariance, shrunk toward a scaled identity.
    pub fn fit(x: ArrayView2<T>, y: &[usize], num_classes: usize, shrinkage: T) -> Result<Self> {
        let (n, d) = x.dim();
        if y.len() != n {
            return Err(MlError::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if num_classes < 2 {
            return Err(MlError::InvalidConfig("LDA needs at least two classes".into()));
        }
        if !(shrinkage >= T::zero() && shrinkage <= T::one()) {
            return Err(MlError::InvalidConfig(format!(
                "shrinkage {shrinkage} outside [0, 1]"
            )));
        }
        let mut counts = vec![0usize; num_classes];
        for &label in y {
            if label >= num_classes {
                return Err(MlError::LabelOutOfRange {
                    label,
                    classes: num_classes,
                });
            }
            counts[label] += 1;
        }
        if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(MlError::MissingClass { class, count });
        }

        let mut means = Array2::<T>::zeros((num_classes, d));
        for (row, &label) in x.rows().into_iter().zip(y) {
            let mut m = means.row_mut(label);
            m += &row;
        }
        for (mut m, &c) in means.rows_mut().into_iter().zip(&counts) {
            m /= T::from_usize(c).expect("count");
        }

        let mut centered = x.to_owned();
        for (mut row, &label) in centered.rows_mut().into_iter().zip(y) {
            row -= &means.row(label);
        }
        let dof = T::from_usize(n - num_classes).expect("dof");
        let mut cov = centered.t().dot(&centered) / dof;
        drop(centered);

        let trace = cov.diag().sum();
        let target = if trace > T::zero() {
            trace / T::from_usize(d).expect("d")
        } else {
            T::one()
        };
        cov *= T::one() - shrinkage;
        for i in 0..d {
            cov[[i, i]] += shrinkage * target;
        }
        let cov_factor = cholesky(cov.view())?;

        let total = T::from_usize(n).expect("n");
        let priors = Array1::from_iter(counts.iter().map(|&c| T::from_usize(c).expect("c") / total));
        let (coef, bias) = discriminants(&means, &cov_factor, &priors);
        Ok(LdaModel {
            class_means: means,
            cov_factor,
            priors,
            shrinkage,
            coef,
            bias,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_means.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.class_means.ncols()
    }

    /// Linear discriminant scores, n x C.
    pub fn scores(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_dim() {
            return Err(MlError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(x.dot(&self.coef) + &self.bias)
    }

    /// Predicted labels and the score matrix they came from.
    pub fn predict(&self, x: ArrayView2<T>) -> Result<(Vec<usize>, Array2<T>)> {
        let scores = self.scores(x)?;
        let labels = scores.rows().into_iter().map(argmax).collect();
        Ok((labels, scores))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header::<T>(KIND_LDA);
        self.write_body(&mut w);
        w.finish()
    }

    pub fn write_body(&self, w: &mut Writer) {
        w.scalar(self.shrinkage);
        w.array1(&self.priors);
        w.array2(&self.class_means);
        w.array2(&self.cov_factor);
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, kind) = Reader::header::<T>(buf)?;
        if kind != KIND_LDA {
            return Err(r.error("not an LDA model"));
        }
        let m = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub fn read_body(r: &mut Reader) -> Result<Self> {
        let shrinkage = r.scalar()?;
        let priors: Array1<T> = r.array1()?;
        let class_means: Array2<T> = r.array2()?;
        let cov_factor: Array2<T> = r.array2()?;
        let d = class_means.ncols();
        if priors.len() != class_means.nrows() || cov_factor.dim() != (d, d) {
            return Err(r.error("inconsistent LDA dimensions"));
        }
        let (coef, bias) = discriminants(&class_means, &cov_factor, &priors);
        Ok(LdaModel {
            class_means,
            cov_factor,
            priors,
            shrinkage,
            coef,
            bias,
        })
    }
}

// W = Σ⁻¹ Mᵀ, b_c = -½ μ_c·W_c + ln π_c.
fn discriminants<T: Scalar>(
    means: &Array2<T>,
    factor: &Array2<T>,
    priors: &Array1<T>,
) -> (Array2<T>, Array1<T>) {
    let coef = cholesky_solve(factor.view(), means.t());
    let half = T::lit(0.5);
    let bias = Array1::from_iter(
        means
            .axis_iter(Axis(0))
            .zip(coef.axis_iter(Axis(1)))
            .zip(priors)
            .map(|((mu, w), &p)| -half * mu.dot(&w) + p.ln()),
    );
    (coef, bias)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: Scalar>(row: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
