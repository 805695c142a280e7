//! One-hidden-layer perceptron with a sigmoid output, trained by Adam on
//! shuffled minibatches of standardized inputs.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logreg::{sigmoid, softplus};
use super::TrainingMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Logistic,
    Tanh,
    #[default]
    Relu,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::Logistic => sigmoid(a),
            Activation::Tanh => a.tanh(),
            Activation::Relu => a.max(0.0),
        }
    }

    /// Derivative expressed through the activated value `h`.
    fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Logistic => h * (1.0 - h),
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => f64::from(u8::from(h > 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningRate {
    #[default]
    Constant,
    /// Divide the step size by 5 after two epochs without improvement.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub activation: Activation,
    pub alpha: f64,
    pub hidden_layer_sizes: usize,
    pub learning_rate: LearningRate,
    pub learning_rate_init: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            activation: Activation::Relu,
            alpha: 1e-4,
            hidden_layer_sizes: 100,
            learning_rate: LearningRate::Constant,
            learning_rate_init: 1e-3,
            max_iter: 200,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub activation: Activation,
    /// Row-major `hidden x inputs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

const BATCH: usize = 32;
const CONSTANT_PATIENCE: usize = 10;
const ADAPTIVE_PATIENCE: usize = 2;
const MIN_LEARNING_RATE: f64 = 1e-6;

impl MlpModel {
    fn inputs(&self) -> usize {
        self.w1.len() / self.b1.len()
    }

    fn hidden(&self, z: &[f64], out: &mut [f64]) {
        let d = self.inputs();
        for (k, h) in out.iter_mut().enumerate() {
            let a = self.b1[k] + self.w1[k * d..(k + 1) * d].iter().zip(z).map(|(w, x)| w * x).sum::<f64>();
            *h = self.activation.apply(a);
        }
    }

    /// Output before the final sigmoid.
    pub fn margin(&self, z: &[f64]) -> f64 {
        let mut h = vec![0.0; self.b1.len()];
        self.hidden(z, &mut h);
        self.b2 + h.iter().zip(&self.w2).map(|(a, b)| a * b).sum::<f64>()
    }

    fn params_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.w1, &mut self.b1, &mut self.w2]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [&mut f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let step = lr * c2.sqrt() / c1;
        for (i, p) in params.iter_mut().enumerate() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            **p -= step * self.m[i] / (self.v[i].sqrt() + Self::EPS);
        }
    }
}

/// Mean log loss plus `alpha / (2 B) ||W||^2` over one batch; accumulates the
/// gradient into `grad` laid out as `[w1, b1, w2, b2]`.
fn batch_loss(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    batch: &[usize],
    alpha: f64,
    grad: &mut [f64],
) -> f64 {
    let d = x.ncols();
    let hdim = model.b1.len();
    let bs = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (gw1, rest) = grad.split_at_mut(hdim * d);
    let (gb1, rest) = rest.split_at_mut(hdim);
    let (gw2, gb2) = rest.split_at_mut(hdim);
    let mut h = vec![0.0; hdim];
    let mut loss = 0.0;
    for &r in batch {
        let row = x.row(r);
        let z = row.as_slice().expect("standard layout");
        model.hidden(z, &mut h);
        let o = model.b2 + h.iter().zip(&model.w2).map(|(a, b)| a * b).sum::<f64>();
        let yi = f64::from(y[r]);
        loss += softplus(o) - yi * o;
        let delta = (sigmoid(o) - yi) / bs;
        gb2[0] += delta;
        for k in 0..hdim {
            gw2[k] += delta * h[k];
            let dh = delta * model.w2[k] * model.activation.derivative(h[k]);
            gb1[k] += dh;
            for (g, v) in gw1[k * d..(k + 1) * d].iter_mut().zip(z) {
                *g += dh * v;
            }
        }
    }
    let sq: f64 = model.w1.iter().chain(&model.w2).map(|w| w * w).sum();
    for (g, w) in gw1.iter_mut().zip(&model.w1) {
        *g += alpha * w / bs;
    }
    for (g, w) in gw2.iter_mut().zip(&model.w2) {
        *g += alpha * w / bs;
    }
    loss / bs + alpha * sq / (2.0 * bs)
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], params: &MlpParams, seed: u64) -> (MlpModel, TrainingMeta) {
    let x = x.as_standard_layout();
    let x = x.view();
    let (n, d) = x.dim();
    let hdim = params.hidden_layer_sizes;
    let mut rng = crate::seed::rng(seed);
    let mut model = MlpModel {
        activation: params.activation,
        w1: glorot(&mut rng, d, hdim, hdim * d),
        b1: glorot(&mut rng, d, hdim, hdim),
        w2: glorot(&mut rng, hdim, 1, hdim),
        b2: glorot(&mut rng, hdim, 1, 1)[0],
    };
    let n_params = hdim * d + 2 * hdim + 1;
    let mut adam = Adam { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 };
    let mut grad = vec![0.0; n_params];
    let batch = BATCH.min(n).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = params.learning_rate_init;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut converged = false;
    let mut epochs = 0;

    while epochs < params.max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let l = batch_loss(&model, x, y, chunk, params.alpha, &mut grad);
            epoch_loss += l * chunk.len() as f64;
            let mut b2 = model.b2;
            {
                let [w1, b1, w2] = model.params_mut();
                let mut refs: Vec<&mut f64> = w1.iter_mut().chain(b1.iter_mut()).chain(w2.iter_mut()).collect();
                refs.push(&mut b2);
                adam.step(&mut refs, &grad, lr);
            }
            model.b2 = b2;
        }
        epoch_loss /= n as f64;

        if epoch_loss > best - params.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(epoch_loss);
        match params.learning_rate {
            LearningRate::Constant if stale > CONSTANT_PATIENCE => {
                converged = true;
                break;
            }
            LearningRate::Adaptive if stale >= ADAPTIVE_PATIENCE => {
                lr /= 5.0;
                stale = 0;
                if lr < MIN_LEARNING_RATE {
                    converged = true;
                    break;
                }
            }
            _ => {}
        }
    }
    (model, TrainingMeta { iterations: epochs, converged })
}

#[cfg(test)]
pub(crate) fn loss_and_grad(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    alpha: f64,
) -> (f64, Vec<f64>) {
    let n = model.w1.len() + 2 * model.b1.len() + 1;
    let mut g = vec![0.0; n];
    let all: Vec<usize> = (0..x.nrows()).collect();
    let l = batch_loss(model, x, y, &all, alpha, &mut g);
    (l, g)
}
