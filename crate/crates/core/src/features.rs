//! Per-participant features computed from the seven response times (seconds).
//!
//! Feature names come from a fixed registry and always appear in registry
//! order: moments, frequency bins, quantiles, transformed intervals, then
//! embedding coordinates.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::N_ITEMS;
use crate::stats::{descriptive::quantile_sorted, pearson_r, t_test_two_sample, TVariant};

pub const MOMENT_NAMES: [&str; 9] = ["mean", "variance", "max", "min", "median", "skew", "kurt", "range", "cv"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Square,
    Log1p,
    ZscoreSquare,
    None,
}

/// Which embedding coordinates (1-based component indices) to append.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub pca: Vec<usize>,
    pub tsne: Vec<usize>,
}

impl EmbeddingSpec {
    pub fn none() -> Self {
        EmbeddingSpec { pca: Vec::new(), tsne: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.pca.is_empty() && self.tsne.is_empty()
    }
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec { pca: vec![1, 2, 3], tsne: vec![1, 2, 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub moments: bool,
    pub bins: bool,
    /// Integer-second lower bin edges; bin `x` covers `[x, next edge)` and the
    /// last bin is one second wide. The first bin also absorbs everything below
    /// the second edge.
    pub bin_edges: Vec<u32>,
    /// Report bin features as fractions of the sequence instead of counts.
    pub proportions: bool,
    pub quantiles: Vec<f64>,
    /// `None` disables the RTx_trans group entirely.
    pub transform: Option<Transform>,
    pub embeddings: EmbeddingSpec,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            moments: true,
            bins: true,
            bin_edges: (1..=10).collect(),
            proportions: false,
            quantiles: vec![0.25],
            transform: Some(Transform::Square),
            embeddings: EmbeddingSpec::default(),
        }
    }
}

impl FeatureSpec {
    pub fn moments_only() -> Self {
        FeatureSpec {
            bins: false,
            quantiles: Vec::new(),
            transform: None,
            embeddings: EmbeddingSpec::none(),
            ..Default::default()
        }
    }

    pub fn without_embeddings(mut self) -> Self {
        self.embeddings = EmbeddingSpec::none();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins && (self.bin_edges.is_empty() || self.bin_edges.windows(2).any(|w| w[0] >= w[1])) {
            return Err(Error::Config("bin edges must be non-empty and strictly increasing".into()));
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::Config("quantiles must lie in (0, 1)".into()));
        }
        if self.embeddings.pca.iter().chain(&self.embeddings.tsne).any(|&k| k == 0) {
            return Err(Error::Config("embedding component indices are 1-based".into()));
        }
        if self.embeddings.pca.iter().any(|&k| k > N_ITEMS) {
            return Err(Error::Config(format!("PCA components exceed {N_ITEMS}")));
        }
        if self.embeddings.tsne.iter().any(|&k| k > 3) {
            return Err(Error::Config("t-SNE has at most 3 output dimensions".into()));
        }
        Ok(())
    }

    /// Registry-ordered feature names this spec produces.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.moments {
            names.extend(MOMENT_NAMES.iter().map(|s| s.to_string()));
        }
        if self.bins {
            for prefix in ["freq", "cum_freq", "big_than"] {
                names.extend(self.bin_edges.iter().map(|e| format!("{prefix}_{e}")));
            }
        }
        names.extend(self.quantiles.iter().map(|q| format!("quantile_{q}")));
        if self.transform.is_some() {
            names.extend((1..=N_ITEMS).map(|i| format!("RT{i}_trans")));
        }
        names.extend(self.embeddings.pca.iter().map(|k| format!("pca_{k}")));
        names.extend(self.embeddings.tsne.iter().map(|k| format!("tsne_{k}")));
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicStats {
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
    pub min: f64,
    pub median: f64,
    pub skew: f64,
    pub kurt: f64,
    pub range: f64,
    pub cv: f64,
}

impl BasicStats {
    pub fn as_array(&self) -> [f64; 9] {
        [self.mean, self.variance, self.max, self.min, self.median, self.skew, self.kurt, self.range, self.cv]
    }
}

fn sorted(rt: &[f64]) -> Vec<f64> {
    let mut v = rt.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// True when the spread is indistinguishable from round-off.
fn negligible_spread(m2: f64, scale: f64) -> bool {
    m2 <= (1e-12 * scale).powi(2)
}

/// Moments of one sequence. Variance uses n - 1; skew and excess kurtosis use
/// population moment ratios and are zero for a constant sequence.
pub fn basic_stats(rt: &[f64]) -> BasicStats {
    let n = rt.len() as f64;
    let s = sorted(rt);
    let mean = rt.iter().sum::<f64>() / n;
    let dev = |k: i32| rt.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
    let m2 = dev(2);
    let scale = s.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let (variance, skew, kurt) = if negligible_spread(m2, scale) {
        (0.0, 0.0, 0.0)
    } else {
        (m2 * n / (n - 1.0), dev(3) / m2.powf(1.5), dev(4) / (m2 * m2) - 3.0)
    };
    let max = s[s.len() - 1];
    let min = s[0];
    BasicStats {
        mean,
        variance,
        max,
        min,
        median: quantile_sorted(&s, 0.5),
        skew,
        kurt,
        range: max - min,
        cv: if mean != 0.0 { variance.sqrt() / mean } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinFeatures {
    pub edges: Vec<u32>,
    pub freq: Vec<f64>,
    pub cum_freq: Vec<f64>,
    pub big_than: Vec<f64>,
}

/// Frequency-bin features as counts (or fractions when `proportions`).
pub fn freq_bins(rt: &[f64], edges: &[u32], proportions: bool) -> BinFeatures {
    let m = edges.len();
    let mut freq = vec![0usize; m];
    for &v in rt {
        // bin j covers [edges[j], upper_j); the first bin reaches down to -inf
        for j in 0..m {
            let upper = edges.get(j + 1).copied().unwrap_or(edges[j] + 1) as f64;
            let lower = if j == 0 { f64::NEG_INFINITY } else { edges[j] as f64 };
            if v >= lower && v < upper {
                freq[j] += 1;
                break;
            }
        }
    }
    let total = rt.len();
    let mut cum = Vec::with_capacity(m);
    let mut acc = 0usize;
    for f in &freq {
        acc += f;
        cum.push(acc);
    }
    let scale = if proportions { 1.0 / total as f64 } else { 1.0 };
    BinFeatures {
        edges: edges.to_vec(),
        freq: freq.iter().map(|&c| c as f64 * scale).collect(),
        cum_freq: cum.iter().map(|&c| c as f64 * scale).collect(),
        big_than: cum.iter().map(|&c| (total - c) as f64 * scale).collect(),
    }
}

/// Quantile of the sequence, linear interpolation at `q (n - 1)`.
pub fn rt_quantile(rt: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(rt), q)
}

pub fn rt_trans(rt: &[f64], transform: Transform) -> Result<Vec<f64>> {
    match transform {
        Transform::Square => Ok(rt.iter().map(|v| v * v).collect()),
        Transform::None => Ok(rt.to_vec()),
        Transform::Log1p => {
            if let Some(bad) = rt.iter().find(|v| **v <= 0.0) {
                return Err(Error::Domain(format!("log1p transform needs positive input, got {bad}")));
            }
            Ok(rt.iter().map(|v| v.ln_1p()).collect())
        }
        Transform::ZscoreSquare => {
            let n = rt.len() as f64;
            let mean = rt.iter().sum::<f64>() / n;
            let ss: f64 = rt.iter().map(|v| (v - mean).powi(2)).sum();
            let scale = rt.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            if negligible_spread(ss / n, scale) {
                return Ok(vec![0.0; rt.len()]);
            }
            let sd = (ss / (n - 1.0)).sqrt();
            Ok(rt.iter().map(|v| ((v - mean) / sd).powi(2)).collect())
        }
    }
}

/// Embedding coordinates for one record (full coordinate vectors; the spec
/// picks which components to use).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordEmbedding {
    pub pca: Option<Vec<f64>>,
    pub tsne: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Concatenate every enabled feature group for one sequence of seconds.
pub fn assemble_features(rt: &[f64], spec: &FeatureSpec, embedding: Option<&RecordEmbedding>) -> Result<FeatureVector> {
    if rt.len() != N_ITEMS {
        return Err(Error::Validation(format!("expected {N_ITEMS} response times, got {}", rt.len())));
    }
    let mut values = Vec::new();
    if spec.moments {
        values.extend(basic_stats(rt).as_array());
    }
    if spec.bins {
        let b = freq_bins(rt, &spec.bin_edges, spec.proportions);
        values.extend(b.freq);
        values.extend(b.cum_freq);
        values.extend(b.big_than);
    }
    for &q in &spec.quantiles {
        values.push(rt_quantile(rt, q));
    }
    if let Some(t) = spec.transform {
        values.extend(rt_trans(rt, t)?);
    }
    let pick = |coords: Option<&Vec<f64>>, comps: &[usize], what: &str| -> Result<Vec<f64>> {
        if comps.is_empty() {
            return Ok(Vec::new());
        }
        let coords = coords.ok_or_else(|| Error::Config(format!("{what} embedding requested but not supplied")))?;
        comps
            .iter()
            .map(|&k| {
                coords
                    .get(k - 1)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("{what} component {k} not available")))
            })
            .collect()
    };
    values.extend(pick(embedding.and_then(|e| e.pca.as_ref()), &spec.embeddings.pca, "pca")?);
    values.extend(pick(embedding.and_then(|e| e.tsne.as_ref()), &spec.embeddings.tsne, "tsne")?);
    Ok(FeatureVector { names: spec.names(), values })
}

/// Records x features, with row identifiers and registry-ordered column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(ids: Vec<String>, names: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let d = names.len();
        let mut values = Array2::zeros((rows.len(), d));
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                values[(i, j)] = *v;
            }
        }
        FeatureMatrix { ids, names, values }
    }

    /// Keep only the named columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            ids: self.ids.clone(),
            names: columns.iter().map(|&j| self.names[j].clone()).collect(),
            values: self.values.select(ndarray::Axis(1), columns),
        }
    }

    /// CSV with a `participant_id` column, optional `label`, then the features.
    pub fn write_csv<W: Write>(&self, labels: Option<&[u8]>, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        let mut header = vec!["participant_id".to_string()];
        if labels.is_some() {
            header.push("label".into());
        }
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut rec = vec![self.ids[i].clone()];
            if let Some(l) = labels {
                rec.push(l[i].to_string());
            }
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Greedy correlation pruning in column order.
///
/// Zero-variance columns are removed first; then a column is kept only if its
/// absolute Pearson correlation with every already kept column is at most
/// `threshold`. Returns kept column indices in ascending order.
pub fn correlation_prune(matrix: ArrayView2<'_, f64>, threshold: f64) -> Result<Vec<usize>> {
    if matrix.nrows() < 3 {
        return Err(Error::Precondition("correlation pruning needs at least three records".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("pruning threshold {threshold} outside (0, 1]")));
    }
    let cols: Vec<Vec<f64>> = matrix.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut kept: Vec<usize> = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            continue;
        }
        let redundant = kept.iter().any(|&k| match pearson_r(col, &cols[k]) {
            Some(r) => r.abs() > threshold,
            None => false,
        });
        if !redundant {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// Per-feature group comparison and association with the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAssociation {
    pub feature: String,
    pub mean: f64,
    pub sd: f64,
    /// Pooled two-sample t of label-0 minus label-1 values.
    #[serde(with = "crate::serde_ext::extended_float")]
    pub t_statistic: f64,
    pub t_p: f64,
    /// Point-biserial correlation with the label; `None` for constant columns.
    pub corr: Option<f64>,
    pub corr_p: Option<f64>,
}

pub fn feature_associations(fm: &FeatureMatrix, labels: &[u8]) -> Result<Vec<FeatureAssociation>> {
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    fm.names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = fm.values.column(j).to_vec();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let g0: Vec<f64> = col.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(v, _)| *v).collect();
            let g1: Vec<f64> = col.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(v, _)| *v).collect();
            let t = t_test_two_sample(&g0, &g1, TVariant::Pooled)?;
            let corr = crate::stats::pearson(&col, &y).ok();
            Ok(FeatureAssociation {
                feature: name.clone(),
                mean,
                sd,
                t_statistic: t.statistic,
                t_p: t.p,
                corr: corr.as_ref().map(|c| c.r),
                corr_p: corr.as_ref().map(|c| c.p),
            })
        })
        .collect()
}
