//! Shapley-value attributions on the model's margin scale.
//!
//! Linear models get the closed form `phi_i = w_i (x_i - mu_i)`. Other models
//! get kernel SHAP: a Shapley-kernel weighted least-squares fit over feature
//! coalitions, with absent features averaged over a background sample. All
//! coalitions are enumerated when there are at most 4096 of them.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{Learned, TrainedModel};

pub const FULL_ENUMERATION_LIMIT: usize = 4096;
pub const DEFAULT_BACKGROUND_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub margin: f64,
    /// `|base + sum(phi) - margin|`.
    pub local_sum_check: f64,
}

impl Attribution {
    fn new(phi: Vec<f64>, base_value: f64, margin: f64) -> Self {
        let local_sum_check = (base_value + phi.iter().sum::<f64>() - margin).abs();
        Attribution { phi, base_value, margin, local_sum_check }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: String,
    pub mean_abs_phi: f64,
}

/// Exact attributions for a fitted logistic regression. `background_means`
/// are raw-scale feature means (usually the training means).
pub fn linear_shap(model: &TrainedModel, x: ArrayView2<'_, f64>, background_means: &[f64]) -> Result<Vec<Attribution>> {
    let Learned::Logreg(lr) = &model.learned else {
        return Err(Error::WrongExplainer { explainer: "linear_shap", model: model.algorithm().to_string() });
    };
    let d = model.n_features;
    if x.ncols() != d || background_means.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.ncols().min(background_means.len()) });
    }
    // Raw-scale slopes: the model is linear in (x - mean) / sd.
    let (w, b): (Vec<f64>, f64) = match &model.scaler {
        Some(s) => {
            let w: Vec<f64> = lr.weights.iter().zip(&s.sd).map(|(w, sd)| w / sd).collect();
            let b = lr.intercept - w.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>();
            (w, b)
        }
        None => (lr.weights.clone(), lr.intercept),
    };
    let base = b + w.iter().zip(background_means).map(|(w, m)| w * m).sum::<f64>();
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            let phi: Vec<f64> = w.iter().zip(row).zip(background_means).map(|((w, x), m)| w * (x - m)).collect();
            Attribution::new(phi, base, model.score_row(&row.to_vec()).1)
        })
        .collect())
}

/// `coalition_budget` bounds the number of coalitions evaluated when full
/// enumeration is too large; it must be at least `d + 2`.
pub fn kernel_shap<F>(margin: F, x: ArrayView1<'_, f64>, background: ArrayView2<'_, f64>, coalition_budget: usize, seed: u64) -> Result<Attribution>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Vec<f64>>,
{
    let d = x.len();
    if d == 0 {
        return Err(Error::Precondition("no features to explain".into()));
    }
    if background.nrows() == 0 {
        return Err(Error::Precondition("background sample is empty".into()));
    }
    if background.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: background.ncols() });
    }
    if coalition_budget < d + 2 {
        return Err(Error::Config(format!("coalition budget {coalition_budget} below d + 2 = {}", d + 2)));
    }
    let value = |mask: &[bool]| -> Result<f64> {
        let mut synth = background.to_owned();
        for (j, &on) in mask.iter().enumerate() {
            if on {
                synth.column_mut(j).fill(x[j]);
            }
        }
        let m = margin(synth.view())?;
        Ok(m.iter().sum::<f64>() / m.len() as f64)
    };
    let base = value(&vec![false; d])?;
    let full = value(&vec![true; d])?;
    if d == 1 {
        return Ok(Attribution::new(vec![full - base], base, full));
    }

    let (masks, weights) = coalitions(d, coalition_budget, seed);
    let mut values = Vec::with_capacity(masks.len());
    for m in &masks {
        values.push(value(m)?);
    }
    let phi = constrained_wls(d, &masks, &weights, &values, base, full)?;
    Ok(Attribution::new(phi, base, full))
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let lg = |v: usize| (1..=v).map(|i| (i as f64).ln()).sum::<f64>();
    lg(n) - lg(k) - lg(n - k)
}

/// Shapley kernel weight of one coalition of size `s` out of `d`.
fn kernel_weight(d: usize, s: usize) -> f64 {
    (d - 1) as f64 / ((s * (d - s)) as f64 * ln_choose(d, s).exp())
}

/// Proper coalitions (neither empty nor full) and their regression weights.
fn coalitions(d: usize, budget: usize, seed: u64) -> (Vec<Vec<bool>>, Vec<f64>) {
    let proper = if d < usize::BITS as usize - 1 { (1usize << d) - 2 } else { usize::MAX };
    if proper + 2 <= FULL_ENUMERATION_LIMIT {
        let masks: Vec<Vec<bool>> = (1..=proper).map(|bits| (0..d).map(|j| bits >> j & 1 == 1).collect()).collect();
        let weights = masks.iter().map(|m| kernel_weight(d, m.iter().filter(|b| **b).count())).collect();
        return (masks, weights);
    }
    // Sample sizes in proportion to the total kernel mass at each size, then a
    // uniform subset of that size; each sample then carries equal weight.
    let size_mass: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
    let total: f64 = size_mass.iter().sum();
    let mut rng = crate::seed::rng(seed);
    let n = budget.saturating_sub(2).max(d);
    let masks = (0..n)
        .map(|_| {
            let mut r = rng.random::<f64>() * total;
            let mut s = 1;
            while s < d - 1 && r >= size_mass[s - 1] {
                r -= size_mass[s - 1];
                s += 1;
            }
            let mut m = vec![false; d];
            for j in sample(&mut rng, d, s) {
                m[j] = true;
            }
            m
        })
        .collect();
    (masks, vec![1.0; n])
}

/// Weighted least squares for phi subject to `sum(phi) = full - base`,
/// solved by eliminating the last coordinate.
fn constrained_wls(d: usize, masks: &[Vec<bool>], weights: &[f64], values: &[f64], base: f64, full: f64) -> Result<Vec<f64>> {
    let total = full - base;
    let k = d - 1;
    let mut xtwx = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut xtwy = nalgebra::DVector::<f64>::zeros(k);
    let mut row = vec![0.0; k];
    for ((m, &w), &v) in masks.iter().zip(weights).zip(values) {
        let last = f64::from(u8::from(m[d - 1]));
        for j in 0..k {
            row[j] = f64::from(u8::from(m[j])) - last;
        }
        let target = v - base - last * total;
        for a in 0..k {
            xtwy[a] += w * row[a] * target;
            for b in 0..k {
                xtwx[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let sol = xtwx
        .clone()
        .cholesky()
        .map(|c| c.solve(&xtwy))
        .or_else(|| xtwx.lu().solve(&xtwy))
        .ok_or_else(|| Error::Domain("coalition sample does not identify all attributions".into()))?;
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    phi.push(total - phi.iter().sum::<f64>());
    Ok(phi)
}

/// Kernel SHAP for any trained model on its margin, with a seeded background
/// sample of at most `background_rows` training rows.
pub fn explain_model(
    model: &TrainedModel,
    x: ArrayView2<'_, f64>,
    train: ArrayView2<'_, f64>,
    background_rows: usize,
    coalition_budget: usize,
    seed: u64,
) -> Result<Vec<Attribution>> {
    let mut rng = crate::seed::derived_rng(seed, &[0xBAC6]);
    let take = background_rows.min(train.nrows());
    let mut idx = sample(&mut rng, train.nrows(), take).into_vec();
    idx.sort_unstable();
    let background: Array2<f64> = train.select(Axis(0), &idx);
    x.rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            kernel_shap(
                |m| model.margin(m),
                row,
                background.view(),
                coalition_budget,
                crate::seed::derive(seed, &[i as u64]),
            )
        })
        .collect()
}

/// Features by descending mean |phi|; ties keep registry order.
pub fn global_importance(attributions: &[Attribution], names: &[String]) -> Result<Vec<Importance>> {
    if attributions.is_empty() {
        return Err(Error::Precondition("no attributions to rank".into()));
    }
    let n = attributions.len() as f64;
    let mut out: Vec<Importance> = names
        .iter()
        .enumerate()
        .map(|(j, name)| Importance {
            feature: name.clone(),
            mean_abs_phi: attributions.iter().map(|a| a.phi[j].abs()).sum::<f64>() / n,
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi));
    Ok(out)
}
