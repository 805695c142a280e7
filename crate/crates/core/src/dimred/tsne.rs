//! Exact t-SNE: per-point bandwidths by binary search on perplexity,
//! symmetrized affinities, Student-t similarities, momentum gradient descent
//! with early exaggeration and per-coordinate gains.

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub out_dims: usize,
    /// Clamped to at most (n - 1) / 3.
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            out_dims: 3,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    pub embedding: Array2<f64>,
    pub kl_divergence: f64,
    /// (iteration, KL) every 10 iterations once exaggeration has ended.
    pub kl_trace: Vec<(usize, f64)>,
    pub perplexity_used: f64,
}

pub const MIN_ROWS: usize = 10;
const KL_EVERY: usize = 10;

fn standardize(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (means, sds) = super::pca::column_moments(x);
    Array2::from_shape_fn(x.dim(), |(i, j)| if sds[j] > 0.0 { (x[(i, j)] - means[j]) / sds[j] } else { 0.0 })
}

fn squared_distances(x: &Array2<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional affinities p_{j|i} with bandwidths chosen so each row's
/// entropy matches log(perplexity).
fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d = &dist[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0_f64, 0.0_f64, f64::INFINITY);
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-beta * d[j]).exp() };
                sum += row[j];
                weighted += row[j] * d[j];
            }
            let sum = sum.max(f64::MIN_POSITIVE);
            let entropy = sum.ln() + beta * weighted / sum;
            row.iter_mut().for_each(|v| *v /= sum);
            let diff = entropy - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    p
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi.max(1e-300)).ln())
        .sum()
}

pub fn tsne_embed(matrix: ArrayView2<'_, f64>, config: &TsneConfig) -> Result<TsneResult> {
    let n = matrix.nrows();
    if n < MIN_ROWS {
        return Err(Error::Precondition(format!("t-SNE needs at least {MIN_ROWS} rows, got {n}")));
    }
    if !(2..=3).contains(&config.out_dims) {
        return Err(Error::Config("t-SNE output dimensions must be 2 or 3".into()));
    }
    let perplexity = config.perplexity.min((n - 1) as f64 / 3.0);
    if perplexity < 2.0 {
        return Err(Error::Config(format!("perplexity {perplexity} below 2 after clamping for n = {n}")));
    }
    let dims = config.out_dims;

    let x = standardize(matrix);
    let dist = squared_distances(&x);
    let cond = conditional_affinities(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut rng = crate::seed::rng(config.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..n * dims).map(|_| init.sample(&mut rng)).collect();
    let mut update = vec![0.0; n * dims];
    let mut gains = vec![1.0_f64; n * dims];
    let mut grad = vec![0.0; n * dims];
    let mut num = vec![0.0; n * n];
    let mut q = vec![0.0; n * n];
    let mut kl_trace = Vec::new();

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iters { config.early_exaggeration } else { 1.0 };
        let momentum = if iter < config.momentum_switch_iter { config.initial_momentum } else { config.final_momentum };

        let mut sum_num = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = (0..dims).map(|k| (y[i * dims + k] - y[j * dims + k]).powi(2)).sum();
                let v = 1.0 / (1.0 + d2);
                num[i * n + j] = v;
                num[j * n + i] = v;
                sum_num += 2.0 * v;
            }
        }
        for (qv, nv) in q.iter_mut().zip(&num) {
            *qv = (nv / sum_num).max(1e-12);
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let coef = 4.0 * (exaggeration * p[i * n + j] - q[i * n + j]) * num[i * n + j];
                for k in 0..dims {
                    grad[i * dims + k] += coef * (y[i * dims + k] - y[j * dims + k]);
                }
            }
        }
        for idx in 0..n * dims {
            let same_sign = (grad[idx] > 0.0) == (update[idx] > 0.0);
            gains[idx] = if same_sign { gains[idx] * 0.8 } else { gains[idx] + 0.2 };
            gains[idx] = gains[idx].max(0.01);
            update[idx] = momentum * update[idx] - config.learning_rate * gains[idx] * grad[idx];
            y[idx] += update[idx];
        }
        for k in 0..dims {
            let mean = (0..n).map(|i| y[i * dims + k]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[i * dims + k] -= mean);
        }
        if iter >= config.exaggeration_iters && (iter + 1 - config.exaggeration_iters).is_multiple_of(KL_EVERY) {
            kl_trace.push((iter + 1, kl(&p, &current_q(&y, n, dims))));
        }
    }
    let kl_divergence = kl(&p, &current_q(&y, n, dims));
    let embedding = Array2::from_shape_vec((n, dims), y).expect("shape matches");
    Ok(TsneResult { embedding, kl_divergence, kl_trace, perplexity_used: perplexity })
}

fn current_q(y: &[f64], n: usize, dims: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    let mut sum = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = (0..dims).map(|k| (y[i * dims + k] - y[j * dims + k]).powi(2)).sum();
            let v = 1.0 / (1.0 + d2);
            q[i * n + j] = v;
            q[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    q.iter_mut().for_each(|v| *v = (*v / sum).max(1e-12));
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seed::rng(seed);
        Array2::from_shape_fn((n, 7), |_| rng.random::<f64>())
    }

    fn quick() -> TsneConfig {
        TsneConfig { iterations: 300, ..Default::default() }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = data(30, 1);
        let a = tsne_embed(x.view(), &quick()).unwrap();
        let b = tsne_embed(x.view(), &quick()).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.embedding.dim(), (30, 3));
    }

    #[test]
    fn centered_output() {
        let r = tsne_embed(data(25, 2).view(), &quick()).unwrap();
        for c in r.embedding.columns() {
            assert!(c.mean().unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(tsne_embed(data(9, 0).view(), &quick()).is_err());
        let r = tsne_embed(data(10, 0).view(), &quick()).unwrap();
        assert_eq!(r.perplexity_used, 3.0);
    }

    #[test]
    fn perplexity_is_matched() {
        let x = standardize(data(40, 4).view());
        let d = squared_distances(&x);
        let p = conditional_affinities(&d, 40, 8.0);
        for i in 0..40 {
            let h: f64 = -p[i * 40..(i + 1) * 40].iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
            assert!((h.exp() - 8.0).abs() < 1e-6);
        }
    }
}
