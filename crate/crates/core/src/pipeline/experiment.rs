//! Glue from a screened cohort to design matrices and cross-validated runs.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate_with, MetricsReport};
use super::resample::ResamplePlan;
use crate::dimred::{pca_fit, pca_transform, tsne_embed, TsneConfig};
use crate::error::{Error, Result};
use crate::features::{assemble_features, correlation_prune, FeatureMatrix, FeatureSpec, RecordEmbedding};
use crate::learners::{InputMode, ModelConfig};
use crate::model::{Cohort, N_ITEMS};
use crate::screening::label;
use crate::seed;

const EMBED_TAG: u64 = 0xE3_BED;

/// Screened records as response-time seconds plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    /// n x 7, seconds.
    pub rt: Array2<f64>,
}

impl Dataset {
    pub fn from_cohort(cohort: &Cohort, label_threshold: i64) -> Result<Self> {
        let n = cohort.len();
        let mut rt = Array2::zeros((n, N_ITEMS));
        let mut ids = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (i, r) in cohort.records.iter().enumerate() {
            let secs = r.rt_seconds().ok_or_else(|| {
                Error::Validation(format!("record {:?} has missing response times; screen first", r.participant_id))
            })?;
            rt.row_mut(i).assign(&ndarray::ArrayView1::from(&secs));
            labels.push(label(r, label_threshold)?);
            ids.push(r.participant_id.clone());
        }
        Ok(Dataset { ids, labels, rt })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same records with labels permuted by `seed` (a null control).
    pub fn with_shuffled_labels(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.labels.shuffle(&mut seed::rng(seed));
        out
    }

    pub fn labels_for(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub spec: FeatureSpec,
    /// Drop later columns whose |r| with an earlier kept column exceeds this.
    pub prune: Option<f64>,
    pub tsne: TsneConfig,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { spec: FeatureSpec::default(), prune: Some(0.8), tsne: TsneConfig::default() }
    }
}

pub fn raw_names() -> Vec<String> {
    (1..=N_ITEMS).map(|i| format!("RT{i}")).collect()
}

/// Embeddings fitted on the given rows only. Returns one entry per row.
pub fn fit_embeddings(rt: &Array2<f64>, spec: &FeatureSpec, tsne: &TsneConfig, seed: u64) -> Result<Vec<RecordEmbedding>> {
    let n = rt.nrows();
    let mut out = vec![RecordEmbedding::default(); n];
    if let Some(&k) = spec.embeddings.pca.iter().max() {
        let fit = pca_fit(rt.view(), k)?;
        let proj = pca_transform(&fit, rt.view())?;
        for (e, row) in out.iter_mut().zip(proj.rows()) {
            e.pca = Some(row.to_vec());
        }
    }
    if let Some(&k) = spec.embeddings.tsne.iter().max() {
        let cfg = TsneConfig { out_dims: k.max(2), seed, ..tsne.clone() };
        let res = tsne_embed(rt.view(), &cfg)?;
        for (e, row) in out.iter_mut().zip(res.embedding.rows()) {
            e.tsne = Some(row.to_vec());
        }
    }
    Ok(out)
}

/// Design matrix for `rows` of the dataset. Embeddings are fitted on exactly
/// these rows, so each balanced resample gets its own.
pub fn design_matrix(ds: &Dataset, mode: InputMode, rows: &[usize], opts: &FeatureOptions, seed: u64) -> Result<FeatureMatrix> {
    let rt = ds.rt.select(Axis(0), rows);
    let ids: Vec<String> = rows.iter().map(|&i| ds.ids[i].clone()).collect();
    match mode {
        InputMode::Raw => Ok(FeatureMatrix { ids, names: raw_names(), values: rt }),
        InputMode::Feature => {
            opts.spec.validate()?;
            let emb = fit_embeddings(&rt, &opts.spec, &opts.tsne, seed)?;
            let feature_rows: Vec<Vec<f64>> = rt
                .rows()
                .into_iter()
                .zip(&emb)
                .map(|(r, e)| assemble_features(&r.to_vec(), &opts.spec, Some(e)).map(|f| f.values))
                .collect::<Result<_>>()?;
            let fm = FeatureMatrix::from_rows(ids, opts.spec.names(), &feature_rows);
            match opts.prune {
                Some(t) => {
                    let kept = correlation_prune(fm.values.view(), t)?;
                    Ok(fm.select(&kept))
                }
                None => Ok(fm),
            }
        }
    }
}

/// Downsample, build the design matrix per repeat, and cross-validate.
pub fn evaluate(
    ds: &Dataset,
    config: &ModelConfig,
    mode: InputMode,
    opts: &FeatureOptions,
    plan: &ResamplePlan,
    k: usize,
) -> Result<MetricsReport> {
    cross_validate_with(config, &ds.labels, plan, k, |r, idx| {
        let s = seed::derive(plan.master_seed, &[EMBED_TAG, r as u64]);
        Ok(design_matrix(ds, mode, idx, opts, s)?.values)
    })
}

/// Seed used for the embeddings of a whole-dataset design matrix.
pub fn embedding_seed(master: u64) -> u64 {
    seed::derive(master, &[EMBED_TAG, u64::MAX])
}
