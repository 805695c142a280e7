//! Repeated balanced downsampling with stratified k-fold cross-validation.
//!
//! Every (repeat, fold) cell gets pre-derived seeds and results are reduced in
//! (repeat, fold) order, so the thread pool schedule cannot change the output.

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{average_roc, roc_auroc, Confusion};
use super::resample::{downsample_balanced, stratified_kfold, ResamplePlan};
use crate::error::{Error, Result};
use crate::learners::{self, label_of, Algorithm, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over cells.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MetricSummary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
    pub confusion: Confusion,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: Algorithm,
    pub repeats: usize,
    pub folds: usize,
    /// Rows per balanced resample.
    pub n_per_repeat: usize,
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub auroc: MetricSummary,
    /// Summed over all cells.
    pub confusion: Confusion,
    /// Cells where precision or recall had a zero denominator (reported as 0).
    pub precision_undefined_cells: usize,
    pub recall_undefined_cells: usize,
    /// Fold ROC curves vertically averaged on a 101-point FPR grid.
    pub roc: Vec<[f64; 2]>,
    pub cells: Vec<CellResult>,
}

/// One resample's design matrix, built by the caller from the selected rows.
pub struct RepeatData {
    pub indices: Vec<usize>,
    pub x: Array2<f64>,
}

/// Cross-validate with a fixed design matrix.
pub fn cross_validate(
    config: &ModelConfig,
    x: ndarray::ArrayView2<'_, f64>,
    y: &[u8],
    plan: &ResamplePlan,
    k: usize,
) -> Result<MetricsReport> {
    if x.nrows() != y.len() {
        return Err(Error::Validation(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    cross_validate_with(config, y, plan, k, |_, idx| Ok(x.select(Axis(0), idx)))
}

/// Cross-validate where each repeat's matrix is produced by `build(repeat,
/// selected_rows)`. This lets embeddings be refit on each balanced resample.
pub fn cross_validate_with<F>(
    config: &ModelConfig,
    y: &[u8],
    plan: &ResamplePlan,
    k: usize,
    build: F,
) -> Result<MetricsReport>
where
    F: Fn(usize, &[usize]) -> Result<Array2<f64>> + Sync,
{
    config.validate()?;
    if plan.repeats == 0 {
        return Err(Error::Config("resample plan needs at least one repeat".into()));
    }
    let repeats: Vec<RepeatData> = (0..plan.repeats)
        .into_par_iter()
        .map(|r| {
            let indices = downsample_balanced(y, plan.downsample_seed(r))?;
            let x = build(r, &indices)?;
            if x.nrows() != indices.len() {
                return Err(Error::Validation("builder returned the wrong number of rows".into()));
            }
            Ok(RepeatData { indices, x })
        })
        .collect::<Result<_>>()?;
    let fold_sets: Vec<Vec<Vec<usize>>> = repeats
        .iter()
        .enumerate()
        .map(|(r, d)| {
            let ys: Vec<u8> = d.indices.iter().map(|&i| y[i]).collect();
            stratified_kfold(&ys, k, plan.fold_seed(r))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..plan.repeats).flat_map(|r| (0..k).map(move |f| (r, f))).collect();
    let results: Vec<(CellResult, Vec<[f64; 2]>)> = cells
        .par_iter()
        .map(|&(r, f)| {
            run_cell(config, &repeats[r], y, &fold_sets[r], r, f, plan.cell_seed(r, f))
                .map_err(|e| Error::Fold { repeat: r, fold: f, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let pick = |g: fn(&CellResult) -> f64| MetricSummary::of(&results.iter().map(|(c, _)| g(c)).collect::<Vec<_>>());
    let mut confusion = Confusion::default();
    results.iter().for_each(|(c, _)| confusion.add(&c.confusion));
    let curves: Vec<Vec<[f64; 2]>> = results.iter().map(|(_, roc)| roc.clone()).collect();
    Ok(MetricsReport {
        algorithm: config.algorithm(),
        repeats: plan.repeats,
        folds: k,
        n_per_repeat: repeats[0].indices.len(),
        accuracy: pick(|c| c.accuracy),
        precision: pick(|c| c.precision),
        recall: pick(|c| c.recall),
        f1: pick(|c| c.f1),
        auroc: pick(|c| c.auroc),
        confusion,
        precision_undefined_cells: results.iter().filter(|(c, _)| c.precision_undefined).count(),
        recall_undefined_cells: results.iter().filter(|(c, _)| c.recall_undefined).count(),
        roc: average_roc(&curves),
        cells: results.into_iter().map(|(c, _)| c).collect(),
    })
}

fn run_cell(
    config: &ModelConfig,
    data: &RepeatData,
    y: &[u8],
    folds: &[Vec<usize>],
    repeat: usize,
    fold: usize,
    seed: u64,
) -> Result<(CellResult, Vec<[f64; 2]>)> {
    let test = &folds[fold];
    let train: Vec<usize> = (0..data.indices.len()).filter(|i| test.binary_search(i).is_err()).collect();
    let label = |rows: &[usize]| -> Vec<u8> { rows.iter().map(|&i| y[data.indices[i]]).collect() };
    let (y_train, y_test) = (label(&train), label(test));
    let cfg = config.clone().with_seed(seed);
    let model = learners::fit(&cfg, data.x.select(Axis(0), &train).view(), &y_train)?;
    let proba = model.predict_proba(data.x.select(Axis(0), test).view())?;
    let pred: Vec<u8> = proba.iter().map(|&p| label_of(p)).collect();
    let m = Confusion::from_predictions(&pred, &y_test).metrics();
    let roc = roc_auroc(&proba, &y_test)?;
    Ok((
        CellResult {
            repeat,
            fold,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auroc: roc.auroc,
            confusion: m.confusion,
            precision_undefined: m.precision_undefined,
            recall_undefined: m.recall_undefined,
        },
        roc.points,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LogregParams, Params};
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn data(n: usize, seed: u64, gap: f64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = crate::seed::rng(seed);
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0)).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            rng.random::<f64>() + if j == 0 && y[i] == 1 { gap } else { 0.0 }
        });
        (x, y)
    }

    fn logreg() -> ModelConfig {
        ModelConfig::new(Params::Logreg(LogregParams::default()), 0)
    }

    #[test]
    fn separable_data_scores_high() {
        let (x, y) = data(200, 1, 3.0);
        let r = cross_validate(&logreg(), x.view(), &y, &ResamplePlan::new(3, 5), 10).unwrap();
        assert!(r.accuracy.mean >= 0.99);
        assert_eq!(r.confusion.total(), 3 * r.n_per_repeat);
        assert_eq!(r.n_per_repeat, 100);
        let c = r.confusion;
        let pooled_acc = (c.tp + c.tn) as f64 / c.total() as f64;
        assert!(pooled_acc >= 0.99);
    }

    #[test]
    fn shuffled_labels_are_at_chance() {
        let (x, mut y) = data(400, 2, 3.0);
        y.shuffle(&mut crate::seed::rng(99));
        let r = cross_validate(&logreg(), x.view(), &y, &ResamplePlan::new(10, 5), 10).unwrap();
        assert!((0.40..=0.60).contains(&r.auroc.mean), "auroc {}", r.auroc.mean);
    }

    #[test]
    fn reproducible_and_schedule_independent() {
        let (x, y) = data(160, 3, 0.5);
        let plan = ResamplePlan::new(4, 8);
        let a = serde_json::to_string(&cross_validate(&logreg(), x.view(), &y, &plan, 5).unwrap()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| serde_json::to_string(&cross_validate(&logreg(), x.view(), &y, &plan, 5).unwrap()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn fold_errors_carry_coordinates() {
        let (x, y) = data(100, 4, 1.0);
        let x = Array2::from_shape_fn((100, 2), |(i, j)| if i == 0 && j == 1 { f64::NAN } else { x[(i, j)] });
        let err = cross_validate(&logreg(), x.view(), &y, &ResamplePlan::new(2, 0), 5).unwrap_err();
        assert!(matches!(err, Error::Fold { .. }), "{err}");
    }
}
