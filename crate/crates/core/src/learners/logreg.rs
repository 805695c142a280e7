//! L2-regularized logistic regression fitted by L-BFGS on standardized inputs.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::lbfgs::{minimize, LbfgsOptions};
use super::TrainingMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    #[default]
    L2,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub penalty: Penalty,
    pub fit_intercept: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogregParams {
    fn default() -> Self {
        LogregParams { c: 1.0, penalty: Penalty::L2, fit_intercept: true, max_iter: 100, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogregModel {
    pub fn margin(&self, z: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// log(1 + exp(m)) without overflow.
pub(crate) fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Mean log loss plus `||w||^2 / (2 C n)`; the intercept is not penalized.
///
/// `params` is `[w_1 .. w_d, b]` when `fit_intercept`, else `[w_1 .. w_d]`.
/// Writes the gradient into `grad` and returns the objective.
pub fn objective(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    params: &[f64],
    settings: &LogregParams,
    grad: &mut [f64],
) -> f64 {
    let (n, d) = x.dim();
    let nf = n as f64;
    let b = if settings.fit_intercept { params[d] } else { 0.0 };
    let w = &params[..d];
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let m = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        // -[y log s(m) + (1-y) log(1 - s(m))] = softplus(m) - y m
        loss += softplus(m) - f64::from(yi) * m;
        let r = (sigmoid(m) - f64::from(yi)) / nf;
        for (g, v) in grad[..d].iter_mut().zip(row) {
            *g += r * v;
        }
        if settings.fit_intercept {
            grad[d] += r;
        }
    }
    loss /= nf;
    if settings.penalty == Penalty::L2 {
        let lam = 1.0 / (settings.c * nf);
        loss += 0.5 * lam * w.iter().map(|v| v * v).sum::<f64>();
        for (g, v) in grad[..d].iter_mut().zip(w) {
            *g += lam * v;
        }
    }
    loss
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], settings: &LogregParams) -> (LogregModel, TrainingMeta) {
    let d = x.ncols();
    let k = d + usize::from(settings.fit_intercept);
    let out = minimize(
        |p, g| objective(x, y, p, settings, g),
        vec![0.0; k],
        &LbfgsOptions { max_iter: settings.max_iter, grad_tol: settings.tol, memory: 10 },
    );
    let intercept = if settings.fit_intercept { out.x[d] } else { 0.0 };
    let model = LogregModel { weights: out.x[..d].to_vec(), intercept };
    (model, TrainingMeta { iterations: out.iterations, converged: out.converged })
}
