//! Sequential backward feature selection scored by k-fold cross-validation.

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Confusion;
use super::resample::stratified_kfold;
use crate::error::{Error, Result};
use crate::learners::{self, label_of, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbsMetric {
    /// Coefficient of determination of predicted probabilities against 0/1 labels.
    #[default]
    R2,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbsOptions {
    /// Stop once this many features remain.
    pub cap: usize,
    pub folds: usize,
    pub metric: SbsMetric,
    pub seed: u64,
}

impl Default for SbsOptions {
    fn default() -> Self {
        SbsOptions { cap: 10, folds: 3, metric: SbsMetric::R2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub removed: String,
    pub removed_index: usize,
    pub subset_size: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub metric: SbsMetric,
    pub folds: usize,
    pub cap: usize,
    pub initial_score: f64,
    pub steps: Vec<SelectionStep>,
    pub final_subset: Vec<String>,
    pub final_indices: Vec<usize>,
}

pub fn r2_score(pred: &[f64], truth: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Mean fold score of `config` restricted to `columns`.
pub fn subset_score(
    config: &ModelConfig,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    columns: &[usize],
    folds: &[Vec<usize>],
    metric: SbsMetric,
) -> Result<f64> {
    let xs = x.select(Axis(1), columns);
    let mut total = 0.0;
    for test in folds {
        let train: Vec<usize> = (0..y.len()).filter(|i| test.binary_search(i).is_err()).collect();
        let ytr: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
        let model = learners::fit(config, xs.select(Axis(0), &train).view(), &ytr)?;
        let proba = model.predict_proba(xs.select(Axis(0), test).view())?;
        total += match metric {
            SbsMetric::R2 => r2_score(&proba, &yte.iter().map(|&v| f64::from(v)).collect::<Vec<_>>()),
            SbsMetric::Accuracy => {
                let pred: Vec<u8> = proba.iter().map(|&p| label_of(p)).collect();
                Confusion::from_predictions(&pred, &yte).metrics().accuracy
            }
        };
    }
    Ok(total / folds.len() as f64)
}

/// Remove one feature at a time, always the one whose removal leaves the best
/// scoring subset (lowest index on ties), until `cap` features remain.
pub fn sequential_backward_selection(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    names: &[String],
    estimator: &ModelConfig,
    options: &SbsOptions,
) -> Result<SelectionTrace> {
    let SbsOptions { cap, folds, metric, seed } = *options;
    let d = x.ncols();
    if names.len() != d || x.nrows() != y.len() {
        return Err(Error::Validation("feature names, columns and labels disagree in size".into()));
    }
    if cap == 0 {
        return Err(Error::Config("feature cap must be at least 1".into()));
    }
    if d <= cap {
        return Err(Error::Precondition(format!("{d} features is not more than the cap of {cap}")));
    }
    let fold_sets = stratified_kfold(y, folds, seed)?;
    let named = |cols: &[usize]| cols.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();
    let score = |cols: &[usize]| {
        subset_score(estimator, x, y, cols, &fold_sets, metric)
            .map_err(|e| Error::Subset { subset: named(cols), source: Box::new(e) })
    };

    let mut current: Vec<usize> = (0..d).collect();
    let initial_score = score(&current)?;
    let mut steps = Vec::new();
    while current.len() > cap {
        let scores: Vec<f64> = (0..current.len())
            .into_par_iter()
            .map(|drop| {
                let mut cols = current.clone();
                cols.remove(drop);
                score(&cols)
            })
            .collect::<Result<_>>()?;
        // Candidates are visited in ascending feature index, so strict
        // improvement keeps the lowest index on ties.
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        let removed_index = current.remove(best);
        steps.push(SelectionStep {
            removed: names[removed_index].clone(),
            removed_index,
            subset_size: current.len(),
            score: scores[best],
        });
    }
    Ok(SelectionTrace {
        metric,
        folds,
        cap,
        initial_score,
        steps,
        final_subset: named(&current),
        final_indices: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LogregParams, Params};
    use ndarray::Array2;
    use rand::Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn too_few_features() {
        let x = Array2::<f64>::zeros((30, 5));
        let y: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let c = ModelConfig::default_for(crate::learners::Algorithm::Logreg);
        let err = sequential_backward_selection(x.view(), &y, &names(5), &c, &SbsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn trace_shrinks_to_cap() {
        let mut rng = crate::seed::rng(2);
        let y: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((60, 6), |(i, j)| rng.random::<f64>() + if j < 2 { f64::from(y[i]) } else { 0.0 });
        let c = ModelConfig::new(Params::Logreg(LogregParams::default()), 0);
        let t = sequential_backward_selection(x.view(), &y, &names(6), &c, &SbsOptions { cap: 2, seed: 1, ..Default::default() }).unwrap();
        assert_eq!(t.steps.len(), 4);
        assert!(t.steps.windows(2).all(|w| w[1].subset_size < w[0].subset_size));
        assert_eq!(t.final_indices, vec![0, 1]);
    }

    #[test]
    fn r2_of_perfect_prediction() {
        assert_eq!(r2_score(&[0.0, 1.0], &[0.0, 1.0]), 1.0);
        assert_eq!(r2_score(&[0.5, 0.5], &[0.0, 1.0]), 0.0);
    }
}
