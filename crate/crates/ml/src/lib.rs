//! Numerical learning kit for profiled side-channel attacks.
//!
//! Everything is generic over the floating-point type through [`Scalar`];
//! the `*32` / `*64` aliases below pick a concrete precision.

mod error;
pub mod fcn;
pub mod io;
pub mod lda;
pub mod linalg;
pub mod pca;
mod scalar;

pub use error::MlError;
pub use fcn::{Activation, EpochStats, FcnModel, TrainConfig, TrainOutcome};
pub use lda::LdaModel;
pub use pca::PcaModel;
pub use scalar::Scalar;

pub type Pca32 = PcaModel<f32>;
pub type Pca64 = PcaModel<f64>;
pub type Lda32 = LdaModel<f32>;
pub type Lda64 = LdaModel<f64>;
pub type Fcn32 = FcnModel<f32>;
pub type Fcn64 = FcnModel<f64>;

pub type Result<T, E = MlError> = std::result::Result<T, E>;

/// Fraction of `predicted` equal to `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}
