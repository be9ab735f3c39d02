//! Fully connected classifier: dense hidden layers with a shared activation,
//! softmax output, cross-entropy loss, Adam updates.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{Reader, Writer, KIND_FCN};
use crate::lda::argmax;
use crate::{MlError, Result, Scalar};

const LEAKY_SLOPE: f64 = 0.01;
const PRELU_INIT: f64 = 0.25;
const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
const PREDICT_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Prelu,
    Elu,
    Selu,
    Swish,
    Mish,
}

impl Activation {
    pub const ALL: [Activation; 7] = [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Prelu,
        Activation::Elu,
        Activation::Selu,
        Activation::Swish,
        Activation::Mish,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Prelu => "prelu",
            Activation::Elu => "elu",
            Activation::Selu => "selu",
            Activation::Swish => "swish",
            Activation::Mish => "mish",
        }
    }

    fn code(self) -> u8 {
        Activation::ALL.iter().position(|&a| a == self).expect("listed") as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        Activation::ALL.get(code as usize).copied()
    }

    /// f(z). `slope` is only read by PReLU.
    pub fn apply<T: Scalar>(self, z: T, slope: T) -> T {
        let zero = T::zero();
        match self {
            Activation::Relu => z.max(zero),
            Activation::LeakyRelu => {
                if z > zero {
                    z
                } else {
                    T::lit(LEAKY_SLOPE) * z
                }
            }
            Activation::Prelu => {
                if z > zero {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Elu => {
                if z > zero {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Selu => {
                let l = T::lit(SELU_LAMBDA);
                if z > zero {
                    l * z
                } else {
                    l * T::lit(SELU_ALPHA) * z.exp_m1()
                }
            }
            Activation::Swish => z * sigmoid(z),
            Activation::Mish => z * softplus(z).tanh(),
        }
    }

    /// f'(z).
    pub fn derivative<T: Scalar>(self, z: T, slope: T) -> T {
        let zero = T::zero();
        let one = T::one();
        match self {
            Activation::Relu => {
                if z > zero {
                    one
                } else {
                    zero
                }
            }
            Activation::LeakyRelu => {
                if z > zero {
                    one
                } else {
                    T::lit(LEAKY_SLOPE)
                }
            }
            Activation::Prelu => {
                if z > zero {
                    one
                } else {
                    slope
                }
            }
            Activation::Elu => {
                if z > zero {
                    one
                } else {
                    z.exp()
                }
            }
            Activation::Selu => {
                let l = T::lit(SELU_LAMBDA);
                if z > zero {
                    l
                } else {
                    l * T::lit(SELU_ALPHA) * z.exp()
                }
            }
            Activation::Swish => {
                let sg = sigmoid(z);
                sg + z * sg * (one - sg)
            }
            Activation::Mish => {
                let t = softplus(z).tanh();
                t + z * (one - t * t) * sigmoid(z)
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Activation::ALL
            .iter()
            .copied()
            .find(|a| a.name() == key || a.name().replace('_', "") == key)
            .ok_or_else(|| MlError::InvalidConfig(format!("unknown activation {s:?}")))
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    let one = T::one();
    if z >= T::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Start the output layer at zero so the first loss is exactly ln C.
    pub zero_init_output: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            hidden: vec![512, 256, 128],
            zero_init_output: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(MlError::InvalidConfig(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(MlError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: FcnModel<T>,
    pub history: Vec<EpochStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// fan_in x fan_out.
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcnModel<T> {
    pub layers: Vec<Dense<T>>,
    pub activation: Activation,
    /// One learnable slope per hidden layer for PReLU, empty otherwise.
    pub prelu_slopes: Vec<T>,
}

struct Cache<T> {
    pre: Vec<Array2<T>>,
    post: Vec<Array2<T>>,
}

impl<T: Scalar> FcnModel<T> {
    /// He-uniform weights, zero biases.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        activation: Activation,
        seed: u64,
        zero_init_output: bool,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in.max(1) as f64).sqrt();
                let weights = if zero_init_output && i == last {
                    Array2::zeros((fan_in, fan_out))
                } else {
                    Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        T::lit(rng.gen_range(-limit..limit))
                    })
                };
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        let prelu_slopes = if activation == Activation::Prelu {
            vec![T::lit(PRELU_INIT); hidden.len()]
        } else {
            Vec::new()
        };
        FcnModel {
            layers,
            activation,
            prelu_slopes,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("layers").weights.ncols()
    }

    fn slope(&self, layer: usize) -> T {
        self.prelu_slopes.get(layer).copied().unwrap_or_else(T::zero)
    }

    fn check_dim(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(MlError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    fn logits(&self, x: ArrayView2<T>, mut cache: Option<&mut Cache<T>>) -> Array2<T> {
        let hidden = self.layers.len() - 1;
        let mut a: Option<Array2<T>> = None;
        for (l, layer) in self.layers[..hidden].iter().enumerate() {
            let input = a.as_ref().map_or(x.view(), |m| m.view());
            let z = input.dot(&layer.weights) + &layer.bias;
            let slope = self.slope(l);
            let act = self.activation;
            let out = z.mapv(|v| act.apply(v, slope));
            if let Some(c) = cache.as_deref_mut() {
                c.pre.push(z);
                c.post.push(out.clone());
            }
            a = Some(out);
        }
        let out = self.layers.last().expect("layers");
        let input = a.as_ref().map_or(x.view(), |m| m.view());
        input.dot(&out.weights) + &out.bias
    }

    /// Class probabilities, one row per input row.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_dim(&x)?;
        let mut out = Array2::zeros((x.nrows(), self.num_classes()));
        for (start, chunk) in (0..x.nrows()).step_by(PREDICT_CHUNK).map(|s| {
            let end = (s + PREDICT_CHUNK).min(x.nrows());
            (s, x.slice(s![s..end, ..]))
        }) {
            let mut z = self.logits(chunk, None);
            softmax_rows(&mut z);
            out.slice_mut(s![start..start + z.nrows(), ..]).assign(&z);
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Result<Vec<usize>> {
        let p = self.forward(x)?;
        Ok(p.rows().into_iter().map(argmax).collect())
    }

    /// Mean cross-entropy of `y` under the current weights.
    pub fn loss(&self, x: ArrayView2<T>, y: &[usize]) -> Result<f64> {
        self.check_dim(&x)?;
        self.check_labels(y, x.nrows())?;
        let mut total = 0.0;
        for s in (0..x.nrows()).step_by(PREDICT_CHUNK) {
            let end = (s + PREDICT_CHUNK).min(x.nrows());
            let z = self.logits(x.slice(s![s..end, ..]), None);
            total += cross_entropy_sum(&z, &y[s..end]);
        }
        Ok(total / x.nrows().max(1) as f64)
    }

    fn check_labels(&self, y: &[usize], n: usize) -> Result<()> {
        if y.len() != n {
            return Err(MlError::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let classes = self.num_classes();
        if let Some(&label) = y.iter().find(|&&l| l >= classes) {
            return Err(MlError::LabelOutOfRange { label, classes });
        }
        Ok(())
    }

    fn zeros_like(&self) -> Self {
        FcnModel {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            activation: self.activation,
            prelu_slopes: vec![T::zero(); self.prelu_slopes.len()],
        }
    }

    // Writes d(mean loss)/dθ into `grad` and returns the mean loss.
    fn backward(&self, x: ArrayView2<T>, y: &[usize], grad: &mut Self) -> f64 {
        let n = x.nrows();
        let mut cache = Cache {
            pre: Vec::new(),
            post: Vec::new(),
        };
        let mut dz = self.logits(x, Some(&mut cache));
        let loss = cross_entropy_sum(&dz, y) / n as f64;
        softmax_rows(&mut dz);
        for (mut row, &label) in dz.rows_mut().into_iter().zip(y) {
            row[label] -= T::one();
        }
        dz /= T::from_usize(n).expect("n");

        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 { x.view() } else { cache.post[l - 1].view() };
            grad.layers[l].weights = input.t().dot(&dz);
            grad.layers[l].bias = dz.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let mut da = dz.dot(&self.layers[l].weights.t());
            let z = &cache.pre[l - 1];
            let slope = self.slope(l - 1);
            if self.activation == Activation::Prelu {
                let mut ds = T::zero();
                Zip::from(&da).and(z).for_each(|&g, &v| {
                    if v <= T::zero() {
                        ds += g * v;
                    }
                });
                grad.prelu_slopes[l - 1] = ds;
            }
            let act = self.activation;
            Zip::from(&mut da)
                .and(z)
                .for_each(|g, &v| *g *= act.derivative(v, slope));
            dz = da;
        }
        loss
    }

    /// Mean loss and its gradient, flattened in [`FcnModel::flat_params`] order.
    pub fn gradient(&self, x: ArrayView2<T>, y: &[usize]) -> Result<(f64, Vec<T>)> {
        self.check_dim(&x)?;
        self.check_labels(y, x.nrows())?;
        let mut grad = self.zeros_like();
        let loss = self.backward(x, y, &mut grad);
        Ok((loss, grad.flat_params()))
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weights.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(&mut self.prelu_slopes);
        out
    }

    /// Weights, then bias, per layer in order, then the PReLU slopes.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out.extend(self.prelu_slopes.iter().copied());
        out
    }

    pub fn set_flat_params(&mut self, params: &[T]) -> Result<()> {
        let total: usize = self.flat_params().len();
        if params.len() != total {
            return Err(MlError::DimensionMismatch {
                expected: total,
                got: params.len(),
            });
        }
        let mut offset = 0;
        for slot in self.param_slices_mut() {
            slot.copy_from_slice(&params[offset..offset + slot.len()]);
            offset += slot.len();
        }
        Ok(())
    }

    /// Trains a fresh network with Adam on shuffled mini-batches. The
    /// optional validation set only feeds the loss curve.
    pub fn train(
        x: ArrayView2<T>,
        y: &[usize],
        validation: Option<(ArrayView2<T>, &[usize])>,
        classes: usize,
        activation: Activation,
        cfg: &TrainConfig,
    ) -> Result<TrainOutcome<T>> {
        cfg.validate()?;
        let n = x.nrows();
        if n == 0 {
            return Err(MlError::InsufficientData { needed: 1, got: 0 });
        }
        let mut model = FcnModel::new(
            x.ncols(),
            &cfg.hidden,
            classes,
            activation,
            cfg.seed,
            cfg.zero_init_output,
        );
        model.check_labels(y, n)?;
        if let Some((vx, vy)) = validation {
            model.check_dim(&vx)?;
            model.check_labels(vy, vx.nrows())?;
        }

        let mut adam = Adam::new(&model, cfg);
        let mut grad = model.zeros_like();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        let mut by: Vec<usize> = Vec::with_capacity(cfg.batch_size);

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut sum = 0.0;
            let mut batches = 0;
            for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
                let bx = x.select(Axis(0), idx);
                by.clear();
                by.extend(idx.iter().map(|&i| y[i]));
                let loss = model.backward(bx.view(), &by, &mut grad);
                if !loss.is_finite() {
                    return Err(MlError::Divergence { epoch, batch });
                }
                adam.step(&mut model, &mut grad);
                sum += loss;
                batches += 1;
            }
            let (val_loss, val_accuracy) = match validation {
                Some((vx, vy)) if !vy.is_empty() => {
                    let loss = model.loss(vx, vy)?;
                    let acc = crate::accuracy(&model.predict(vx)?, vy);
                    (Some(loss), Some(acc))
                }
                _ => (None, None),
            };
            history.push(EpochStats {
                epoch,
                train_loss: sum / batches as f64,
                val_loss,
                val_accuracy,
            });
        }
        Ok(TrainOutcome { model, history })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header::<T>(KIND_FCN);
        self.write_body(&mut w);
        w.finish()
    }

    pub fn write_body(&self, w: &mut Writer) {
        w.u8(self.activation.code());
        w.u32(self.layers.len() as u32);
        for layer in &self.layers {
            w.array2(&layer.weights);
            w.array1(&layer.bias);
        }
        w.array1(&Array1::from_vec(self.prelu_slopes.clone()));
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let (mut r, kind) = Reader::header::<T>(buf)?;
        if kind != KIND_FCN {
            return Err(r.error("not an FCN model"));
        }
        let m = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub fn read_body(r: &mut Reader) -> Result<Self> {
        let code = r.u8()?;
        let activation =
            Activation::from_code(code).ok_or_else(|| r.error("unknown activation code"))?;
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(r.error("network has no layers"));
        }
        let mut layers: Vec<Dense<T>> = Vec::new();
        for _ in 0..count {
            let weights: Array2<T> = r.array2()?;
            let bias: Array1<T> = r.array1()?;
            let chains = layers
                .last()
                .map_or(true, |prev| prev.weights.ncols() == weights.nrows());
            if bias.len() != weights.ncols() || !chains {
                return Err(r.error("layer dimensions do not chain"));
            }
            layers.push(Dense { weights, bias });
        }
        let prelu_slopes = r.array1::<T>()?.to_vec();
        let expected = if activation == Activation::Prelu { count - 1 } else { 0 };
        if prelu_slopes.len() != expected {
            return Err(r.error("PReLU slope count does not match hidden layers"));
        }
        Ok(FcnModel {
            layers,
            activation,
            prelu_slopes,
        })
    }
}

fn softmax_rows<T: Scalar>(z: &mut Array2<T>) {
    for mut row in z.rows_mut() {
        let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn cross_entropy_sum<T: Scalar>(logits: &Array2<T>, y: &[usize]) -> f64 {
    logits
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &label)| {
            let max = row.fold(T::neg_infinity(), |m, &v| m.max(v)).to_f64_lossy();
            let lse = row
                .iter()
                .map(|&v| (v.to_f64_lossy() - max).exp())
                .sum::<f64>()
                .ln()
                + max;
            lse - row[label].to_f64_lossy()
        })
        .sum()
}

struct Adam<T> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    fn new(model: &FcnModel<T>, cfg: &TrainConfig) -> Self {
        let mut shadow = model.zeros_like();
        let m: Vec<Vec<T>> = shadow.param_slices_mut().iter().map(|s| s.to_vec()).collect();
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            t: 0,
            v: m.clone(),
            m,
        }
    }

    fn step(&mut self, model: &mut FcnModel<T>, grad: &mut FcnModel<T>) {
        self.t += 1;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let c1 = T::one() - b1;
        let c2 = T::one() - b2;
        let bc1 = T::lit(1.0 - self.beta1.powi(self.t));
        let bc2 = T::lit(1.0 - self.beta2.powi(self.t));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        let params = model.param_slices_mut();
        let grads = grad.param_slices_mut();
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + c1 * gi;
                v[i] = b2 * v[i] + c2 * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
