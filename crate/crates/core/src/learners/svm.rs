//! RBF-kernel support vector classifier.
//!
//! The dual is solved by sequential minimal optimization with second-order
//! working-set selection; probabilities come from a sigmoid fitted to
//! out-of-fold decision values (3 internal folds).

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainingMeta;

const TAU: f64 = 1e-12;
const PLATT_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_max_iter() -> usize {
    1_000_000
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: 0.1, tol: 1e-3, max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub platt_a: f64,
    pub platt_b: f64,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Raw dual solution over all training rows.
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve_dual(rows: &[Vec<f64>], y: &[u8], params: &SvmParams) -> DualSolution {
    let n = rows.len();
    let ys: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = ys[i] * ys[j] * rbf(&rows[i], &rows[j], params.gamma);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        // i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = if ys[t] > 0.0 {
                (!upper(alpha[t])).then_some(-grad[t])
            } else {
                (!lower(alpha[t])).then_some(grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let (grad_diff, quad, bound_ok) = if ys[t] > 0.0 {
                    if !lower(alpha[t]) {
                        gmax2 = gmax2.max(grad[t]);
                    }
                    (gmax + grad[t], 2.0 - 2.0 * ys[i] * q[i * n + t], !lower(alpha[t]))
                } else {
                    if !upper(alpha[t]) {
                        gmax2 = gmax2.max(-grad[t]);
                    }
                    (gmax - grad[t], 2.0 + 2.0 * ys[i] * q[i * n + t], !upper(alpha[t]))
                };
                if bound_ok && grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gmax + gmax2 < params.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q[i * n + j];
        if ys[i] != ys[j] {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += q[i * n + k] * di + q[j * n + k] * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if upper(alpha[t]) {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    DualSolution { alpha, rho, iterations, converged }
}

fn decision(support: &[Vec<f64>], coef: &[f64], rho: f64, gamma: f64, z: &[f64]) -> f64 {
    support.iter().zip(coef).map(|(s, c)| c * rbf(s, z, gamma)).sum::<f64>() - rho
}

/// Sigmoid fit `P(y = 1 | f) = 1 / (1 + exp(A f + B))` by Newton's method
/// with backtracking on regularized targets.
pub fn platt_fit(dec: &[f64], y: &[u8]) -> (f64, f64) {
    let prior1 = y.iter().filter(|&&v| v == 1).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&v| if v == 1 { hi } else { lo }).collect();
    let (max_iter, min_step, sigma, eps) = (100, 1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(f, ti)| {
                let fapb = f * a + b;
                if fapb >= 0.0 {
                    ti * fapb + (-fapb).exp().ln_1p()
                } else {
                    (ti - 1.0) * fapb + fapb.exp().ln_1p()
                }
            })
            .sum()
    };
    let mut fval = objective(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (f, ti) in dec.iter().zip(&t) {
            let fapb = f * a + b;
            let (p, q) = if fapb >= 0.0 {
                let e = (-fapb).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = fapb.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}

fn to_model(rows: &[Vec<f64>], y: &[u8], sol: &DualSolution, gamma: f64) -> SvmModel {
    let mut support = Vec::new();
    let mut dual_coef = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(rows[t].clone());
            dual_coef.push(if y[t] == 1 { a } else { -a });
        }
    }
    SvmModel { support, dual_coef, rho: sol.rho, gamma, platt_a: 0.0, platt_b: 0.0 }
}

/// Stratified internal folds for the calibration split.
fn internal_folds(y: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = crate::seed::derived_rng(seed, &[0x5e_a1]);
    let mut fold = vec![0; y.len()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    fold
}

/// Fit on standardized rows. Calibration uses out-of-fold decision values when
/// every internal training split contains both classes, otherwise in-sample ones.
pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], params: &SvmParams, seed: u64) -> (SvmModel, TrainingMeta) {
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let sol = solve_dual(&rows, y, params);
    let mut model = to_model(&rows, y, &sol, params.gamma);

    let folds = internal_folds(y, PLATT_FOLDS, seed);
    let mut oof = vec![0.0; rows.len()];
    let mut usable = true;
    for f in 0..PLATT_FOLDS {
        let train: Vec<usize> = (0..rows.len()).filter(|&i| folds[i] != f).collect();
        let has_both = train.iter().any(|&i| y[i] == 1) && train.iter().any(|&i| y[i] == 0);
        if !has_both || train.len() == rows.len() {
            usable = false;
            break;
        }
        let tr_rows: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
        let tr_y: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let sub = solve_dual(&tr_rows, &tr_y, params);
        let m = to_model(&tr_rows, &tr_y, &sub, params.gamma);
        for i in (0..rows.len()).filter(|&i| folds[i] == f) {
            oof[i] = decision(&m.support, &m.dual_coef, m.rho, m.gamma, &rows[i]);
        }
    }
    if !usable {
        oof = rows.iter().map(|r| model.decision(r)).collect();
    }
    let (a, b) = platt_fit(&oof, y);
    model.platt_a = a;
    model.platt_b = b;
    (model, TrainingMeta { iterations: sol.iterations, converged: sol.converged })
}

impl SvmModel {
    pub fn decision(&self, z: &[f64]) -> f64 {
        decision(&self.support, &self.dual_coef, self.rho, self.gamma, z)
    }

    pub fn proba_from_decision(&self, f: f64) -> f64 {
        super::logreg::sigmoid(-(self.platt_a * f + self.platt_b))
    }
}
