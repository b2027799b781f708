use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_training_data, clamp_prob, Predictor};
use crate::error::Result;
use crate::rng::rng_from_seed;

/// Training hyperparameters. Defaults: 100 ReLU units, Adam with
/// lr 1e-3, betas (0.9, 0.999), eps 1e-8, L2 1e-4, minibatches of
/// min(200, N), at most 200 epochs, stop after 10 epochs whose loss does not
/// beat the best loss by a relative 1e-4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            alpha: 1e-4,
            batch_size: 200,
            max_epochs: 200,
            tol: 1e-4,
            n_iter_no_change: 10,
        }
    }
}

/// Weights of a one-hidden-layer ReLU network with a 2-way softmax head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    /// Glorot-uniform weights and biases.
    pub fn init(n_in: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
        };
        let w1 = uniform(n_in, hidden, n_in, hidden);
        let b1 = uniform(1, hidden, n_in, hidden).remove_axis(Axis(0));
        let w2 = uniform(hidden, 2, hidden, 2);
        let b2 = uniform(1, 2, hidden, 2).remove_axis(Axis(0));
        Self { w1, b1, w2, b2 }
    }

    fn hidden(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (x.dot(&self.w1) + &self.b1).mapv(|v| v.max(0.0))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        softmax_rows(self.hidden(x).dot(&self.w2) + &self.b2)
    }

    /// Mean cross-entropy plus `alpha / (2n) * (||W1||^2 + ||W2||^2)`, and
    /// the gradient of that loss.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[u8], alpha: f64) -> (f64, MlpParams) {
        let n = x.nrows() as f64;
        let pre = x.dot(&self.w1) + &self.b1;
        let h = pre.mapv(|v| v.max(0.0));
        let proba = softmax_rows(h.dot(&self.w2) + &self.b2);
        let mut loss = 0.0;
        let mut delta = proba.clone();
        for (i, &yi) in y.iter().enumerate() {
            loss -= clamp_prob(proba[[i, yi as usize]]).ln();
            delta[[i, yi as usize]] -= 1.0;
        }
        delta /= n;
        let reg = alpha / n;
        loss = loss / n
            + 0.5 * reg * (self.w1.iter().map(|v| v * v).sum::<f64>() + self.w2.iter().map(|v| v * v).sum::<f64>());

        let gw2 = h.t().dot(&delta) + &self.w2 * reg;
        let gb2 = delta.sum_axis(Axis(0));
        let mut dh = delta.dot(&self.w2.t());
        dh.zip_mut_with(&pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        let gw1 = x.t().dot(&dh) + &self.w1 * reg;
        let gb1 = dh.sum_axis(Axis(0));
        (loss, MlpParams { w1: gw1, b1: gb1, w2: gw2, b2: gb2 })
    }

    fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    logits
}

struct Adam {
    m: MlpParams,
    v: MlpParams,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut MlpParams, grad: &MlpParams, cfg: &MlpConfig) {
        self.t += 1;
        let lr = cfg.learning_rate * (1.0 - cfg.beta2.powi(self.t)).sqrt() / (1.0 - cfg.beta1.powi(self.t));
        let grads = grad.slices();
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        for (((p, g), m), v) in params.slices_mut().into_iter().zip(grads).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= lr * m[i] / (v[i].sqrt() + cfg.epsilon);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub params: MlpParams,
    pub epochs: usize,
}

impl Mlp {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], seed: u64, cfg: &MlpConfig) -> Result<Self> {
        check_training_data(x, y)?;
        let n = x.nrows();
        let mut params = MlpParams::init(x.ncols(), cfg.hidden, seed);
        let mut adam = Adam { m: params.zeros_like(), v: params.zeros_like(), t: 0 };
        let mut rng = rng_from_seed(seed ^ 0x5eed_5eed_5eed_5eed);
        let batch = cfg.batch_size.clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut epochs = 0;
        let mut xb = Array2::<f64>::zeros((batch, x.ncols()));
        let mut yb = vec![0u8; batch];
        while epochs < cfg.max_epochs {
            epochs += 1;
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let m = chunk.len();
                for (r, &i) in chunk.iter().enumerate() {
                    xb.row_mut(r).assign(&x.row(i));
                    yb[r] = y[i];
                }
                let (loss, grad) = params.loss_and_grad(xb.slice(s![..m, ..]), &yb[..m], cfg.alpha);
                epoch_loss += loss * m as f64;
                adam.step(&mut params, &grad, cfg);
            }
            epoch_loss /= n as f64;
            if epoch_loss < best * (1.0 - cfg.tol) {
                best = epoch_loss;
                stale = 0;
            } else {
                best = best.min(epoch_loss);
                stale += 1;
                if stale >= cfg.n_iter_no_change {
                    break;
                }
            }
        }
        Ok(Self { params, epochs })
    }
}

impl Predictor for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.params.forward(x)
    }
}
