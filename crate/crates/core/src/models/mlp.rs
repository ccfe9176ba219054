use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, ClassWeight};
use crate::error::{Error, Result};

pub const HIDDEN_UNITS: [usize; 2] = [50, 300];
pub const CLASS_COUNT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment buffers over all trainable parameters, flattened in
/// the model's tensor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn zeros(n: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let c1 = 1.0 - cfg.beta1.powf(step as f64);
    let c2 = 1.0 - cfg.beta2.powf(step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One Adam update of a flat parameter vector.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: grads.len(),
        });
    }
    state.step += 1;
    adam_update(params, grads, &mut state.m, &mut state.v, state.step, lr, cfg);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MlpArchitecture {
    pub activation: Activation,
    pub dropout_rates: [f64; 2],
    pub use_batch_norm: bool,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        MlpArchitecture {
            activation: Activation::Relu,
            dropout_rates: [0.2, 0.3],
            use_batch_norm: true,
            bn_momentum: 0.99,
            bn_epsilon: 1e-5,
        }
    }
}

impl MlpArchitecture {
    /// Affine layers only: no nonlinearity, no dropout, no batch-norm.
    pub fn linear() -> Self {
        MlpArchitecture {
            activation: Activation::Identity,
            dropout_rates: [0.0, 0.0],
            use_batch_norm: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MlpConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_lambda: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    pub architecture: MlpArchitecture,
    pub class_weight: ClassWeight,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 64,
            l2_lambda: 0.0,
            seed: 1,
            adam: AdamConfig::default(),
            architecture: MlpArchitecture::default(),
            class_weight: ClassWeight::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ModelFormat(format!(
                "{what}: shape {:?} needs {n} values, found {}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }
}

/// Weights are stored `[in, out]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Dense {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        Dense {
            weights: Tensor {
                shape: vec![fan_in, fan_out],
                data: (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect(),
            },
            bias: Tensor::filled(vec![fan_out], 0.0),
        }
    }

    fn in_dim(&self) -> usize {
        self.weights.shape[0]
    }

    fn out_dim(&self) -> usize {
        self.weights.shape[1]
    }

    fn param_count(&self) -> usize {
        self.weights.data.len() + self.bias.data.len()
    }

    fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let (k, n) = (self.in_dim(), self.out_dim());
        let w = &self.weights.data;
        let mut out = Vec::with_capacity(rows * n);
        for r in 0..rows {
            out.extend_from_slice(&self.bias.data);
            let o = &mut out[r * n..];
            for (i, &xv) in x[r * k..(r + 1) * k].iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (oj, wj) in o[..n].iter_mut().zip(&w[i * n..(i + 1) * n]) {
                    *oj += xv * wj;
                }
            }
        }
        out
    }

    /// Returns `(dW, db, dx)`.
    fn backward(&self, x: &[f64], rows: usize, dout: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (k, n) = (self.in_dim(), self.out_dim());
        let w = &self.weights.data;
        let mut dw = vec![0.0; k * n];
        let mut db = vec![0.0; n];
        let mut dx = vec![0.0; rows * k];
        for r in 0..rows {
            let d = &dout[r * n..(r + 1) * n];
            for (b, g) in db.iter_mut().zip(d) {
                *b += g;
            }
            for i in 0..k {
                let xv = x[r * k + i];
                let wrow = &w[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for j in 0..n {
                    acc += d[j] * wrow[j];
                }
                dx[r * k + i] = acc;
                if xv != 0.0 {
                    for (dwj, g) in dw[i * n..(i + 1) * n].iter_mut().zip(d) {
                        *dwj += xv * g;
                    }
                }
            }
        }
        (dw, db, dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub moving_mean: Tensor,
    pub moving_variance: Tensor,
}

struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl BatchNorm {
    fn new(ch: usize) -> Self {
        BatchNorm {
            gamma: Tensor::filled(vec![ch], 1.0),
            beta: Tensor::filled(vec![ch], 0.0),
            moving_mean: Tensor::filled(vec![ch], 0.0),
            moving_variance: Tensor::filled(vec![ch], 1.0),
        }
    }

    fn channels(&self) -> usize {
        self.gamma.data.len()
    }

    fn forward_infer(&self, x: &[f64], eps: f64) -> Vec<f64> {
        let ch = self.channels();
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i % ch;
                let xhat = (v - self.moving_mean.data[c]) / (self.moving_variance.data[c] + eps).sqrt();
                self.gamma.data[c] * xhat + self.beta.data[c]
            })
            .collect()
    }

    fn forward_train(&self, x: &[f64], rows: usize, eps: f64) -> (Vec<f64>, BnCache) {
        let ch = self.channels();
        let n = rows as f64;
        let mut mean = vec![0.0; ch];
        for r in 0..rows {
            for c in 0..ch {
                mean[c] += x[r * ch + c];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; ch];
        for r in 0..rows {
            for c in 0..ch {
                let d = x[r * ch + c] - mean[c];
                var[c] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = vec![0.0; rows * ch];
        let mut y = vec![0.0; rows * ch];
        for i in 0..rows * ch {
            let c = i % ch;
            xhat[i] = (x[i] - mean[c]) * inv_std[c];
            y[i] = self.gamma.data[c] * xhat[i] + self.beta.data[c];
        }
        (
            y,
            BnCache {
                xhat,
                inv_std,
                mean,
                var,
            },
        )
    }

    /// Returns `(dgamma, dbeta, dx)` for batch-statistics mode.
    fn backward(&self, dy: &[f64], rows: usize, cache: &BnCache) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let ch = self.channels();
        let n = rows as f64;
        let mut dgamma = vec![0.0; ch];
        let mut dbeta = vec![0.0; ch];
        for i in 0..rows * ch {
            let c = i % ch;
            dgamma[c] += dy[i] * cache.xhat[i];
            dbeta[c] += dy[i];
        }
        // sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
        let mut dx = vec![0.0; rows * ch];
        for i in 0..rows * ch {
            let c = i % ch;
            let g = self.gamma.data[c];
            dx[i] = cache.inv_std[c] / n
                * (n * g * dy[i] - g * dbeta[c] - cache.xhat[i] * g * dgamma[c]);
        }
        (dgamma, dbeta, dx)
    }

    fn update_moving(&mut self, cache: &BnCache, momentum: f64) {
        for c in 0..self.channels() {
            let m = &mut self.moving_mean.data[c];
            *m = momentum * *m + (1.0 - momentum) * cache.mean[c];
            let v = &mut self.moving_variance.data[c];
            *v = momentum * *v + (1.0 - momentum) * cache.var[c];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MlpModel {
    pub input_dim: usize,
    pub architecture: MlpArchitecture,
    pub dense1: Dense,
    pub bn1: BatchNorm,
    pub dense2: Dense,
    pub bn2: BatchNorm,
    pub output: Dense,
    pub adam_state: AdamState,
    /// Mean minibatch loss per completed epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamCounts {
    pub trainable: usize,
    pub non_trainable: usize,
    pub total: usize,
    pub per_layer: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Infer,
}

pub fn build_mlp(input_dim: usize, seed: u64) -> Result<MlpModel> {
    build_mlp_with(input_dim, MlpArchitecture::default(), seed)
}

pub fn build_mlp_with(input_dim: usize, architecture: MlpArchitecture, seed: u64) -> Result<MlpModel> {
    if input_dim == 0 {
        return Err(Error::invalid("MLP input dimension must be at least 1"));
    }
    if architecture.dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(Error::invalid("dropout rates must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [h1, h2] = HIDDEN_UNITS;
    let dense1 = Dense::glorot(input_dim, h1, &mut rng);
    let dense2 = Dense::glorot(h1, h2, &mut rng);
    let output = Dense::glorot(h2, CLASS_COUNT, &mut rng);
    let mut m = MlpModel {
        input_dim,
        architecture,
        dense1,
        bn1: BatchNorm::new(h1),
        dense2,
        bn2: BatchNorm::new(h2),
        output,
        adam_state: AdamState::zeros(0),
        loss_history: Vec::new(),
    };
    m.adam_state = AdamState::zeros(m.param_counts().trainable);
    Ok(m)
}

const TENSOR_COUNT: usize = 10;

struct Cache {
    x: Vec<f64>,
    z1: Vec<f64>,
    drop1: Option<Vec<f64>>,
    bn1: Option<BnCache>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    drop2: Option<Vec<f64>>,
    bn2: Option<BnCache>,
    h2: Vec<f64>,
    logits: Vec<f64>,
}

fn activate(z: &[f64], act: Activation) -> Vec<f64> {
    match act {
        Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Identity => z.to_vec(),
    }
}

fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

fn log_softmax_row(logits: &[f64]) -> [f64; CLASS_COUNT] {
    let mx = logits[0].max(logits[1]);
    let lse = mx + ((logits[0] - mx).exp() + (logits[1] - mx).exp()).ln();
    [logits[0] - lse, logits[1] - lse]
}

fn flatten(batch: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(batch.len() * dim);
    for row in batch {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        x.extend_from_slice(row);
    }
    Ok(x)
}

impl MlpModel {
    pub fn param_counts(&self) -> ParamCounts {
        let bn = |b: &BatchNorm| 4 * b.channels();
        let per_layer = vec![
            ("dense_1".to_string(), self.dense1.param_count()),
            ("batch_normalization_1".to_string(), bn(&self.bn1)),
            ("dense_2".to_string(), self.dense2.param_count()),
            ("batch_normalization_2".to_string(), bn(&self.bn2)),
            ("dense_3".to_string(), self.output.param_count()),
        ];
        let total: usize = per_layer.iter().map(|(_, n)| n).sum();
        let non_trainable = 2 * (self.bn1.channels() + self.bn2.channels());
        ParamCounts {
            trainable: total - non_trainable,
            non_trainable,
            total,
            per_layer,
        }
    }

    fn tensors(&self) -> [&Tensor; TENSOR_COUNT] {
        [
            &self.dense1.weights,
            &self.dense1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            &self.dense2.weights,
            &self.dense2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; TENSOR_COUNT] {
        [
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }

    /// Structural checks for a deserialized model.
    pub fn validate(&self) -> Result<()> {
        let names = [
            "dense1.weights",
            "dense1.bias",
            "bn1.gamma",
            "bn1.beta",
            "dense2.weights",
            "dense2.bias",
            "bn2.gamma",
            "bn2.beta",
            "output.weights",
            "output.bias",
        ];
        for (t, name) in self.tensors().iter().zip(names) {
            t.check(name)?;
        }
        self.bn1.moving_mean.check("bn1.movingMean")?;
        self.bn1.moving_variance.check("bn1.movingVariance")?;
        self.bn2.moving_mean.check("bn2.movingMean")?;
        self.bn2.moving_variance.check("bn2.movingVariance")?;
        let [h1, h2] = HIDDEN_UNITS;
        let shapes_ok = self.dense1.weights.shape == [self.input_dim, h1]
            && self.dense1.bias.shape == [h1]
            && self.dense2.weights.shape == [h1, h2]
            && self.dense2.bias.shape == [h2]
            && self.output.weights.shape == [h2, CLASS_COUNT]
            && self.output.bias.shape == [CLASS_COUNT]
            && [&self.bn1.gamma, &self.bn1.beta, &self.bn1.moving_mean, &self.bn1.moving_variance]
                .iter()
                .all(|t| t.shape == [h1])
            && [&self.bn2.gamma, &self.bn2.beta, &self.bn2.moving_mean, &self.bn2.moving_variance]
                .iter()
                .all(|t| t.shape == [h2]);
        if !shapes_ok {
            return Err(Error::ModelFormat("MLP tensor shapes do not match the architecture".into()));
        }
        let n = self.param_counts().trainable;
        if self.adam_state.m.len() != n || self.adam_state.v.len() != n {
            return Err(Error::ModelFormat("Adam state size does not match parameters".into()));
        }
        Ok(())
    }

    fn forward(
        &self,
        x: Vec<f64>,
        rows: usize,
        batch_stats: bool,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Cache {
        let arch = &self.architecture;
        let eps = arch.bn_epsilon;
        let mut drop = |a: Vec<f64>, rate: f64| -> (Vec<f64>, Option<Vec<f64>>) {
            match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => {
                    let mask = dropout_mask(a.len(), rate, rng);
                    (a.iter().zip(&mask).map(|(v, k)| v * k).collect(), Some(mask))
                }
                _ => (a, None),
            }
        };
        let norm = |bn: &BatchNorm, d: &[f64]| -> (Vec<f64>, Option<BnCache>) {
            if !arch.use_batch_norm {
                (d.to_vec(), None)
            } else if batch_stats {
                let (y, c) = bn.forward_train(d, rows, eps);
                (y, Some(c))
            } else {
                (bn.forward_infer(d, eps), None)
            }
        };

        let z1 = self.dense1.forward(&x, rows);
        let (d1, drop1) = drop(activate(&z1, arch.activation), arch.dropout_rates[0]);
        let (h1, bn1) = norm(&self.bn1, &d1);
        let z2 = self.dense2.forward(&h1, rows);
        let (d2, drop2) = drop(activate(&z2, arch.activation), arch.dropout_rates[1]);
        let (h2, bn2) = norm(&self.bn2, &d2);
        let logits = self.output.forward(&h2, rows);
        Cache {
            x,
            z1,
            drop1,
            bn1,
            h1,
            z2,
            drop2,
            bn2,
            h2,
            logits,
        }
    }

    /// Gradients of `sum_i w_i * -log p(y_i)` with per-row weights
    /// `row_scale`, in tensor order.
    fn backward(&self, cache: &Cache, rows: usize, y: &[u8], row_scale: &[f64]) -> Vec<Vec<f64>> {
        let arch = &self.architecture;
        let mut dlogits = vec![0.0; rows * CLASS_COUNT];
        for r in 0..rows {
            let lp = log_softmax_row(&cache.logits[r * 2..r * 2 + 2]);
            for c in 0..CLASS_COUNT {
                let target = (y[r] as usize == c) as u8 as f64;
                dlogits[r * 2 + c] = row_scale[r] * (lp[c].exp() - target);
            }
        }
        let (dw3, db3, dh2) = self.output.backward(&cache.h2, rows, &dlogits);

        let through_block = |dh: Vec<f64>,
                             bn: &BatchNorm,
                             bn_cache: &Option<BnCache>,
                             mask: &Option<Vec<f64>>,
                             z: &[f64]|
         -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let (dgamma, dbeta, dd) = match bn_cache {
                Some(c) => bn.backward(&dh, rows, c),
                None => {
                    let ch = bn.channels();
                    (vec![0.0; ch], vec![0.0; ch], dh)
                }
            };
            let mut dz = dd;
            if let Some(mask) = mask {
                dz.iter_mut().zip(mask).for_each(|(g, k)| *g *= k);
            }
            if arch.activation == Activation::Relu {
                dz.iter_mut().zip(z).for_each(|(g, &v)| {
                    if v <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            (dgamma, dbeta, dz)
        };

        let (dg2, dbt2, dz2) = through_block(dh2, &self.bn2, &cache.bn2, &cache.drop2, &cache.z2);
        let (dw2, db2, dh1) = self.dense2.backward(&cache.h1, rows, &dz2);
        let (dg1, dbt1, dz1) = through_block(dh1, &self.bn1, &cache.bn1, &cache.drop1, &cache.z1);
        let (dw1, db1, _) = self.dense1.backward(&cache.x, rows, &dz1);
        vec![dw1, db1, dg1, dbt1, dw2, db2, dg2, dbt2, dw3, db3]
    }

    /// Class probabilities in inference mode.
    pub fn predict_proba(&self, batch: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
        let x = flatten(batch, self.input_dim)?;
        let cache = self.forward(x, batch.len(), false, None);
        Ok(softmax_rows(&cache.logits))
    }

    /// Probability of class 1 for a single row.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_proba(&[x.to_vec()])?[0][1])
    }

    /// Mean class-weighted cross-entropy in inference mode.
    pub fn loss(&self, x: &[Vec<f64>], y: &[u8], class_weights: (f64, f64)) -> Result<f64> {
        check_xy(x, y)?;
        let xs = flatten(x, self.input_dim)?;
        let cache = self.forward(xs, x.len(), false, None);
        Ok(batch_loss(&cache.logits, y, class_weights))
    }
}

fn softmax_rows(logits: &[f64]) -> Vec<[f64; 2]> {
    logits
        .chunks_exact(CLASS_COUNT)
        .map(|l| {
            let lp = log_softmax_row(l);
            let p1 = lp[1].exp();
            [1.0 - p1, p1]
        })
        .collect()
}

fn batch_loss(logits: &[f64], y: &[u8], cw: (f64, f64)) -> f64 {
    let n = y.len() as f64;
    logits
        .chunks_exact(CLASS_COUNT)
        .zip(y)
        .map(|(l, &label)| {
            let w = if label == 1 { cw.1 } else { cw.0 };
            -w * log_softmax_row(l)[label as usize]
        })
        .sum::<f64>()
        / n
}

/// Forward pass. Train mode applies dropout drawn from `seed`, normalizes
/// with batch statistics, and updates the moving statistics.
pub fn mlp_forward(
    m: &mut MlpModel,
    batch: &[Vec<f64>],
    mode: ForwardMode,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    match mode {
        ForwardMode::Infer => m.predict_proba(batch),
        ForwardMode::Train => {
            if batch.len() < 2 && m.architecture.use_batch_norm {
                return Err(Error::invalid(
                    "train-mode batch-norm needs a batch of at least 2 rows",
                ));
            }
            let x = flatten(batch, m.input_dim)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cache = m.forward(x, batch.len(), true, Some(&mut rng));
            update_moving(m, &cache);
            Ok(softmax_rows(&cache.logits))
        }
    }
}

fn update_moving(m: &mut MlpModel, cache: &Cache) {
    let momentum = m.architecture.bn_momentum;
    if let Some(c) = &cache.bn1 {
        m.bn1.update_moving(c, momentum);
    }
    if let Some(c) = &cache.bn2 {
        m.bn2.update_moving(c, momentum);
    }
}

/// Splits `0..n` into consecutive batches; a trailing batch of one row is
/// folded into the previous batch.
fn batch_ranges(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(size)
        .map(|s| s..(s + size).min(n))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().end = last.end;
    }
    out
}

/// Minibatch Adam on softmax cross-entropy.
pub fn train_mlp(x: &[Vec<f64>], y: &[u8], cfg: &MlpConfig) -> Result<MlpModel> {
    let dim = check_xy(x, y)?;
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut model = build_mlp_with(dim, cfg.architecture, cfg.seed)?;
    train_mlp_from(&mut model, x, y, cfg)?;
    Ok(model)
}

/// Continues training an existing model in place.
pub fn train_mlp_from(model: &mut MlpModel, x: &[Vec<f64>], y: &[u8], cfg: &MlpConfig) -> Result<()> {
    let dim = check_xy(x, y)?;
    if dim != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            actual: dim,
        });
    }
    let cw = cfg.class_weight.resolve(y)?;
    let n = x.len();
    let ranges = batch_ranges(n, cfg.batch_size);
    if model.architecture.use_batch_norm && ranges.iter().any(|r| r.len() < 2) {
        return Err(Error::invalid(
            "batch-norm training needs batches of at least 2 rows",
        ));
    }
    // Separate stream from the initializer so that reseeding init does not
    // shift the shuffles.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_5a4d);
    let mut order: Vec<usize> = (0..n).collect();
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, range) in ranges.iter().enumerate() {
            let idx = &order[range.clone()];
            let rows = idx.len();
            let mut xb = Vec::with_capacity(rows * dim);
            for &i in idx {
                xb.extend_from_slice(&x[i]);
            }
            let yb: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            let cache = model.forward(xb, rows, true, Some(&mut rng));
            let loss = batch_loss(&cache.logits, &yb, cw);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, batch {b}"
                )));
            }
            epoch_loss += loss * rows as f64;
            let scale: Vec<f64> = yb
                .iter()
                .map(|&l| if l == 1 { cw.1 } else { cw.0 } / rows as f64)
                .collect();
            let mut grads = model.backward(&cache, rows, &yb, &scale);
            if cfg.l2_lambda > 0.0 {
                for t in [0, 4, 8] {
                    let w = &model.tensors()[t].data;
                    grads[t].iter_mut().zip(w).for_each(|(g, w)| *g += cfg.l2_lambda * w);
                }
            }

            let mut state = std::mem::replace(&mut model.adam_state, AdamState::zeros(0));
            state.step += 1;
            let mut offset = 0;
            for ((t, g), &len) in model.tensors_mut().into_iter().zip(&grads).zip(&sizes) {
                adam_update(
                    &mut t.data,
                    g,
                    &mut state.m[offset..offset + len],
                    &mut state.v[offset..offset + len],
                    state.step,
                    cfg.learning_rate,
                    &cfg.adam,
                );
                offset += len;
            }
            model.adam_state = state;
            update_moving(model, &cache);
        }
        model.loss_history.push(epoch_loss / n as f64);
        log::debug!("mlp epoch {epoch}: loss {:.6}", epoch_loss / n as f64);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub samples: usize,
    pub step: f64,
    pub seed: u64,
    /// Multiplies the analytic gradient; anything other than 1 simulates a
    /// backprop bug.
    pub fault_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            samples: 200,
            step: 1e-5,
            seed: 7,
            fault_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters resampled because the perturbation flipped a ReLU.
    pub skipped: usize,
}

/// Denominator floor for the relative error. Central differences of a loss
/// near 1 carry roughly 1e-11 of absolute roundoff at the default step, so
/// smaller gradients are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Compares backprop against central differences of the mean
/// cross-entropy on a fixed batch. Dropout is off and batch-norm uses the
/// batch's own statistics; moving statistics are not touched.
pub fn gradient_check(
    m: &MlpModel,
    batch: &[Vec<f64>],
    y: &[u8],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    check_xy(batch, y)?;
    if batch.len() < 2 {
        return Err(Error::invalid("gradient check needs a batch of at least 2 rows"));
    }
    let rows = batch.len();
    let x = flatten(batch, m.input_dim)?;
    let mut probe = m.clone();
    probe.architecture.dropout_rates = [0.0, 0.0];

    let base = probe.forward(x.clone(), rows, true, None);
    let scale = vec![1.0 / rows as f64; rows];
    let grads = probe.backward(&base, rows, y, &scale);
    let relu = probe.architecture.activation == Activation::Relu;
    let signs = |c: &Cache| -> Vec<bool> { c.z1.iter().chain(&c.z2).map(|&v| v > 0.0).collect() };
    let base_signs = if relu { signs(&base) } else { Vec::new() };

    let sizes: Vec<usize> = probe.tensors().iter().map(|t| t.data.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = opts.step;
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let max_attempts = opts.samples * 20;
    let mut attempts = 0;
    while report.checked < opts.samples && attempts < max_attempts {
        attempts += 1;
        let mut flat = rng.gen_range(0..total);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        let original = probe.tensors()[t].data[flat];
        let eval = |value: f64, probe: &mut MlpModel| {
            probe.tensors_mut()[t].data[flat] = value;
            let c = probe.forward(x.clone(), rows, true, None);
            let loss = batch_loss(&c.logits, y, (1.0, 1.0));
            let flipped = relu && signs(&c) != base_signs;
            (loss, flipped)
        };
        let (lp, fp) = eval(original + h, &mut probe);
        let (lm, fm) = eval(original - h, &mut probe);
        probe.tensors_mut()[t].data[flat] = original;
        if fp || fm {
            report.skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * h);
        let analytic = grads[t][flat] * opts.fault_scale;
        let err = (analytic - numeric).abs() / numeric.abs().max(GRAD_CHECK_FLOOR);
        report.max_relative_error = report.max_relative_error.max(err);
        report.checked += 1;
    }
    if report.checked < opts.samples {
        return Err(Error::invalid(format!(
            "gradient check sampled only {} of {} parameters away from ReLU kinks",
            report.checked, opts.samples
        )));
    }
    Ok(report)
}
