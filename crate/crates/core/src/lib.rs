//! SNOW-V with a simulated power side channel: cipher, leakage model, trace
//! files, fixed-vs-random t-tests and a profiled key-recovery attack.

pub mod attack;
pub mod campaign;
pub mod cipher;
mod error;
pub mod leakage;
pub mod store;
pub mod tvla;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub type GroupStats32 = tvla::GroupStats<f32>;
pub type GroupStats64 = tvla::GroupStats<f64>;
pub type Classifier32 = attack::ProfiledClassifier<f32>;
pub type Classifier64 = attack::ProfiledClassifier<f64>;
pub type Bank32 = attack::ClassifierBank<f32>;
pub type Bank64 = attack::ClassifierBank<f64>;
