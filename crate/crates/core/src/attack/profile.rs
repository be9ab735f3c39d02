//! Profiling pipeline: KVC window, optional PCA, then LDA or a dense network.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snowv_ml::io::{Reader, Writer, KIND_FCN, KIND_LDA};
use snowv_ml::{accuracy, Activation, EpochStats, FcnModel, LdaModel, PcaModel, Scalar, TrainConfig};

use super::kvc::kvc_select;
use super::target::{ByteHalf, Lfsr, TargetSpec, TargetWord};
use crate::campaign::TraceSet;
use crate::{Error, Result};

const KIND_PROFILED: u8 = 0x10;
const KIND_BANK: u8 = 0x11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Lda,
    Fcn(Activation),
}

impl FromStr for Method {
    type Err = Error;

    /// `lda`, or `fcn-<activation>`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("lda") {
            return Ok(Method::Lda);
        }
        s.strip_prefix("fcn-")
            .and_then(|a| a.parse().ok())
            .map(Method::Fcn)
            .ok_or_else(|| Error::Parse(format!("method {s:?}")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Lda => f.write_str("lda"),
            Method::Fcn(a) => write!(f, "fcn-{a}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocess {
    None,
    Pca,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Samples kept by the KVC window.
    pub top_k: usize,
    pub shrinkage: f64,
    pub pca_variance: f64,
    pub pca_max_components: usize,
    #[serde(with = "train_config")]
    pub train: TrainConfig,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            top_k: 128,
            shrinkage: 1e-3,
            pca_variance: 0.99,
            pca_max_components: 2000,
            train: TrainConfig::default(),
        }
    }
}

mod train_config {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use snowv_ml::TrainConfig;

    #[derive(Serialize, Deserialize)]
    struct Repr {
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        seed: u64,
        hidden: Vec<usize>,
        zero_init_output: bool,
    }

    pub fn serialize<S: Serializer>(c: &TrainConfig, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            seed: c.seed,
            hidden: c.hidden.clone(),
            zero_init_output: c.zero_init_output,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TrainConfig, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(TrainConfig {
            epochs: r.epochs,
            batch_size: r.batch_size,
            learning_rate: r.learning_rate,
            beta1: r.beta1,
            beta2: r.beta2,
            epsilon: r.epsilon,
            seed: r.seed,
            hidden: r.hidden,
            zero_init_output: r.zero_init_output,
        })
    }
}

/// Target words of every trace. Needs per-trace keys.
pub fn target_values(ts: &TraceSet, spec: &TargetSpec) -> Result<Vec<u16>> {
    let keys = ts
        .keys
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("trace set has no keys; labels unavailable".into()))?;
    Ok(keys
        .iter()
        .zip(&ts.ivs)
        .map(|(k, iv)| spec.word_value(&crate::cipher::KeyMaterial::new(*k, *iv)))
        .collect())
}

pub fn labels(ts: &TraceSet, spec: &TargetSpec) -> Result<Vec<usize>> {
    Ok(target_values(ts, spec)?
        .into_iter()
        .map(|w| spec.label_of(w))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier<T> {
    Lda(LdaModel<T>),
    Fcn(FcnModel<T>),
}

/// A fitted pipeline for one target.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfiledClassifier<T, M = Classifier<T>> {
    pub target: TargetSpec,
    pub samples_per_trace: usize,
    pub poi: Vec<usize>,
    pub pca: Option<PcaModel<T>>,
    pub model: M,
}

fn select_window<T: Scalar>(ts: &TraceSet, poi: &[usize]) -> Array2<T> {
    ts.samples
        .select(Axis(1), poi)
        .mapv(|v| T::from_f32(v).expect("f32"))
}

impl<T: Scalar> ProfiledClassifier<T> {
    /// Fits every stage on `train` only. `val` feeds the network's loss curve.
    pub fn fit(
        train: &TraceSet,
        val: Option<&TraceSet>,
        target: &TargetSpec,
        method: Method,
        preprocess: Preprocess,
        cfg: &ProfileConfig,
    ) -> Result<(Self, Vec<EpochStats>)> {
        target.validate()?;
        let values = target_values(train, target)?;
        let y: Vec<usize> = values.iter().map(|&w| target.label_of(w)).collect();
        let poi = kvc_select(train.samples.view(), &values, cfg.top_k)?.selected;
        let samples_per_trace = train.samples_per_trace();
        let window = select_window::<T>(train, &poi);
        let pca = match preprocess {
            Preprocess::Pca => Some(PcaModel::fit(
                window.view(),
                cfg.pca_variance,
                cfg.pca_max_components,
            )?),
            Preprocess::None => None,
        };
        let x = match &pca {
            Some(p) => p.transform(window.view())?,
            None => window,
        };
        let classes = target.num_classes();
        let mut history = Vec::new();
        let model = match method {
            Method::Lda => Classifier::Lda(LdaModel::fit(x.view(), &y, classes, T::lit(cfg.shrinkage))?),
            Method::Fcn(act) => {
                let staged = ProfiledClassifier {
                    target: *target,
                    samples_per_trace,
                    poi: poi.clone(),
                    pca: pca.clone(),
                    model: (),
                };
                let val_data = match val {
                    Some(v) if !v.is_empty() => Some((staged.features(v)?, labels(v, target)?)),
                    _ => None,
                };
                let out = FcnModel::train(
                    x.view(),
                    &y,
                    val_data.as_ref().map(|(vx, vy)| (vx.view(), vy.as_slice())),
                    classes,
                    act,
                    &cfg.train,
                )?;
                history = out.history;
                Classifier::Fcn(out.model)
            }
        };
        Ok((
            ProfiledClassifier {
                target: *target,
                samples_per_trace,
                poi,
                pca,
                model,
            },
            history,
        ))
    }
}

impl<T: Scalar, M> ProfiledClassifier<T, M> {
    fn window(&self, ts: &TraceSet) -> Result<Array2<T>> {
        if ts.samples_per_trace() != self.samples_per_trace {
            return Err(Error::Incompatible(format!(
                "classifier expects {} samples per trace, trace set has {}",
                self.samples_per_trace,
                ts.samples_per_trace()
            )));
        }
        Ok(select_window(ts, &self.poi))
    }

    fn project(&self, window: Array2<T>) -> Result<Array2<T>> {
        match &self.pca {
            Some(p) => Ok(p.transform(window.view())?),
            None => Ok(window),
        }
    }

    /// Classifier inputs for `ts`.
    pub fn features(&self, ts: &TraceSet) -> Result<Array2<T>> {
        let w = self.window(ts)?;
        self.project(w)
    }
}

impl<T: Scalar> ProfiledClassifier<T> {
    pub fn predict(&self, ts: &TraceSet) -> Result<Vec<usize>> {
        let x = self.features(ts)?;
        Ok(match &self.model {
            Classifier::Lda(m) => m.predict(x.view())?.0,
            Classifier::Fcn(m) => m.predict(x.view())?,
        })
    }

    /// Fraction of traces whose label is predicted correctly.
    pub fn accuracy(&self, ts: &TraceSet) -> Result<f64> {
        let truth = labels(ts, &self.target)?;
        Ok(accuracy(&self.predict(ts)?, &truth))
    }

    pub fn write_body(&self, w: &mut Writer) {
        write_target(w, &self.target);
        w.u64(self.samples_per_trace as u64);
        w.indices(&self.poi);
        match &self.pca {
            Some(p) => {
                w.u8(1);
                p.write_body(w);
            }
            None => w.u8(0),
        }
        match &self.model {
            Classifier::Lda(m) => {
                w.u8(KIND_LDA);
                m.write_body(w);
            }
            Classifier::Fcn(m) => {
                w.u8(KIND_FCN);
                m.write_body(w);
            }
        }
    }

    pub fn read_body(r: &mut Reader) -> Result<Self> {
        let target = read_target(r)?;
        let samples_per_trace = r.u64()? as usize;
        let poi = r.indices()?;
        if poi.iter().any(|&i| i >= samples_per_trace) {
            return Err(r.error("point of interest outside the trace").into());
        }
        let pca = match r.u8()? {
            0 => None,
            1 => Some(PcaModel::read_body(r)?),
            _ => return Err(r.error("bad PCA flag").into()),
        };
        let model = match r.u8()? {
            KIND_LDA => Classifier::Lda(LdaModel::read_body(r)?),
            KIND_FCN => Classifier::Fcn(FcnModel::read_body(r)?),
            _ => return Err(r.error("unknown classifier kind").into()),
        };
        Ok(ProfiledClassifier {
            target,
            samples_per_trace,
            poi,
            pca,
            model,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header::<T>(KIND_PROFILED);
        self.write_body(&mut w);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, kind) = Reader::header::<T>(buf)?;
        if kind != KIND_PROFILED {
            return Err(r.error("not a profiled classifier").into());
        }
        let m = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(m)
    }
}

fn write_target(w: &mut Writer, t: &TargetSpec) {
    let (kind, lfsr, index) = match t.word {
        TargetWord::State { lfsr, index } => (0, lfsr, index),
        TargetWord::Feedback { lfsr } => (1, lfsr, 0),
    };
    w.u8(kind);
    w.u8(match lfsr {
        Lfsr::A => 0,
        Lfsr::B => 1,
    });
    w.u8(index);
    w.u8(t.step);
    w.u8(t.bits);
    w.u8(match t.half {
        ByteHalf::Low => 0,
        ByteHalf::High => 1,
    });
}

fn read_target(r: &mut Reader) -> Result<TargetSpec> {
    let at = r.offset();
    let raw: Vec<u8> = (0..6).map(|_| r.u8()).collect::<std::result::Result<_, _>>()?;
    let lfsr = match raw[1] {
        0 => Lfsr::A,
        1 => Lfsr::B,
        _ => return Err(bad_target(at)),
    };
    let word = match raw[0] {
        0 => TargetWord::State { lfsr, index: raw[2] },
        1 => TargetWord::Feedback { lfsr },
        _ => return Err(bad_target(at)),
    };
    let half = match raw[5] {
        0 => ByteHalf::Low,
        1 => ByteHalf::High,
        _ => return Err(bad_target(at)),
    };
    let t = TargetSpec {
        word,
        step: raw[3],
        bits: raw[4],
        half,
    };
    t.validate().map_err(|_| bad_target(at))?;
    Ok(t)
}

fn bad_target(offset: usize) -> Error {
    Error::Ml(snowv_ml::MlError::Format {
        offset,
        message: "invalid target spec".into(),
    })
}

/// Per-split accuracies of one profiling run.
#[derive(Clone, Debug)]
pub struct ProfilingResult<T> {
    pub classifier: ProfiledClassifier<T>,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub history: Vec<EpochStats>,
}

pub fn run_profiling_attack<T: Scalar>(
    train: &TraceSet,
    val: &TraceSet,
    test: &TraceSet,
    target: &TargetSpec,
    method: Method,
    preprocess: Preprocess,
    cfg: &ProfileConfig,
) -> Result<ProfilingResult<T>> {
    let (classifier, history) =
        ProfiledClassifier::<T>::fit(train, Some(val), target, method, preprocess, cfg)?;
    let train_accuracy = classifier.accuracy(train)?;
    let val_accuracy = if val.is_empty() {
        None
    } else {
        Some(classifier.accuracy(val)?)
    };
    let test_accuracy = classifier.accuracy(test)?;
    Ok(ProfilingResult {
        classifier,
        train_accuracy,
        val_accuracy,
        test_accuracy,
        history,
    })
}

/// Fits one pipeline per target on the rayon pool. Histories come back in
/// target order.
pub fn fit_bank<T: Scalar>(
    train: &TraceSet,
    val: Option<&TraceSet>,
    targets: &[TargetSpec],
    method: Method,
    preprocess: Preprocess,
    cfg: &ProfileConfig,
) -> Result<(ClassifierBank<T>, Vec<Vec<EpochStats>>)> {
    let fitted = targets
        .par_iter()
        .map(|t| ProfiledClassifier::<T>::fit(train, val, t, method, preprocess, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (classifiers, histories) = fitted.into_iter().unzip();
    Ok((ClassifierBank { classifiers }, histories))
}

/// Classifiers for several targets, looked up by target.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierBank<T> {
    pub classifiers: Vec<ProfiledClassifier<T>>,
}

impl<T: Scalar> ClassifierBank<T> {
    pub fn get(&self, target: &TargetSpec) -> Option<&ProfiledClassifier<T>> {
        self.classifiers.iter().find(|c| &c.target == target)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header::<T>(KIND_BANK);
        w.u32(self.classifiers.len() as u32);
        for c in &self.classifiers {
            c.write_body(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, kind) = Reader::header::<T>(buf)?;
        if kind != KIND_BANK {
            return Err(r.error("not a classifier bank").into());
        }
        let n = r.u32()? as usize;
        let classifiers = (0..n)
            .map(|_| ProfiledClassifier::read_body(&mut r))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(ClassifierBank { classifiers })
    }
}
