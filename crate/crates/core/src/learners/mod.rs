//! Five binary classifiers behind one fit / predict contract.
//!
//! Every model except the decision tree standardizes its inputs inside
//! [`fit`] and stores the constants, so callers always pass raw features.
//! Trained models serialize to a versioned JSON document whose
//! deserialization reproduces predictions bit-exactly.

pub mod dtree;
pub mod knn;
pub mod lbfgs;
pub mod logreg;
pub mod mlp;
pub mod scaler;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use dtree::DtreeParams;
pub use knn::{KnnParams, SearchAlgorithm, Weights};
pub use logreg::{LogregParams, Penalty};
pub use mlp::{Activation, LearningRate, MlpParams};
pub use scaler::Scaler;
pub use svm::SvmParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Logreg,
    Dtree,
    SvmRbf,
    Knn,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::Logreg, Algorithm::Dtree, Algorithm::SvmRbf, Algorithm::Knn, Algorithm::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Logreg => "logreg",
            Algorithm::Dtree => "dtree",
            Algorithm::SvmRbf => "svm_rbf",
            Algorithm::Knn => "knn",
            Algorithm::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s || (s == "svm" && *a == Algorithm::SvmRbf))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Which inputs a model sees: the seven raw intervals or the engineered features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Raw,
    Feature,
}

impl InputMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Raw => "raw",
            InputMode::Feature => "feature",
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(InputMode::Raw),
            "feature" | "features" => Ok(InputMode::Feature),
            _ => Err(Error::Config(format!("unknown input mode {s:?} (raw|feature)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Params {
    Logreg(LogregParams),
    Dtree(DtreeParams),
    SvmRbf(SvmParams),
    Knn(KnnParams),
    Mlp(MlpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(params: Params, seed: u64) -> Self {
        ModelConfig { params, seed }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.params {
            Params::Logreg(_) => Algorithm::Logreg,
            Params::Dtree(_) => Algorithm::Dtree,
            Params::SvmRbf(_) => Algorithm::SvmRbf,
            Params::Knn(_) => Algorithm::Knn,
            Params::Mlp(_) => Algorithm::Mlp,
        }
    }

    /// Library defaults for each algorithm.
    pub fn default_for(algorithm: Algorithm) -> Self {
        let params = match algorithm {
            Algorithm::Logreg => Params::Logreg(LogregParams::default()),
            Algorithm::Dtree => Params::Dtree(DtreeParams::default()),
            Algorithm::SvmRbf => Params::SvmRbf(SvmParams::default()),
            Algorithm::Knn => Params::Knn(KnnParams::default()),
            Algorithm::Mlp => Params::Mlp(MlpParams::default()),
        };
        ModelConfig { params, seed: 0 }
    }

    /// Tuned hyperparameters reported for each algorithm and input mode.
    pub fn tuned(algorithm: Algorithm, mode: InputMode) -> Self {
        let raw = mode == InputMode::Raw;
        let params = match algorithm {
            Algorithm::Logreg => Params::Logreg(LogregParams {
                c: if raw { 6.38 } else { 0.16 },
                max_iter: if raw { 100 } else { 300 },
                tol: 1e-4,
                ..Default::default()
            }),
            Algorithm::Dtree => Params::Dtree(if raw {
                DtreeParams { max_depth: Some(8), min_samples_leaf: 4, min_samples_split: 10, ..Default::default() }
            } else {
                DtreeParams { max_depth: Some(1), min_samples_leaf: 2, min_samples_split: 3, ..Default::default() }
            }),
            Algorithm::SvmRbf => Params::SvmRbf(SvmParams {
                c: if raw { 1.15 } else { 6.76 },
                gamma: if raw { 0.01 } else { 0.03 },
                tol: 1e-3,
                ..Default::default()
            }),
            Algorithm::Knn => Params::Knn(if raw {
                KnnParams {
                    n_neighbors: 10,
                    weights: Weights::Distance,
                    algorithm: SearchAlgorithm::KdTree,
                    leaf_size: 27,
                    p: 2,
                }
            } else {
                KnnParams {
                    n_neighbors: 3,
                    weights: Weights::Uniform,
                    algorithm: SearchAlgorithm::BallTree,
                    leaf_size: 32,
                    p: 2,
                }
            }),
            Algorithm::Mlp => Params::Mlp(if raw {
                MlpParams {
                    activation: Activation::Logistic,
                    alpha: 0.0021,
                    hidden_layer_sizes: 150,
                    learning_rate: LearningRate::Adaptive,
                    learning_rate_init: 0.001,
                    max_iter: 129,
                    tol: 1e-4,
                }
            } else {
                MlpParams {
                    activation: Activation::Identity,
                    alpha: 0.0011,
                    hidden_layer_sizes: 100,
                    learning_rate: LearningRate::Adaptive,
                    learning_rate_init: 0.006,
                    max_iter: 274,
                    tol: 1e-4,
                }
            }),
        };
        ModelConfig { params, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match &self.params {
            Params::Logreg(p) => {
                if !pos(p.c) {
                    return bad("logreg C must be > 0");
                }
                if !(p.tol >= 0.0) || p.max_iter == 0 {
                    return bad("logreg needs tol >= 0 and max_iter >= 1");
                }
            }
            Params::Dtree(p) => {
                if p.max_depth == Some(0) {
                    return bad("dtree max_depth must be >= 1 when set");
                }
                if p.min_samples_split < 2 || p.min_samples_leaf < 1 {
                    return bad("dtree needs min_samples_split >= 2 and min_samples_leaf >= 1");
                }
            }
            Params::SvmRbf(p) => {
                if !pos(p.c) || !pos(p.gamma) {
                    return bad("svm_rbf C and gamma must be > 0");
                }
                if !pos(p.tol) {
                    return bad("svm_rbf tol must be > 0");
                }
            }
            Params::Knn(p) => {
                if p.n_neighbors < 1 {
                    return bad("knn n_neighbors must be >= 1");
                }
                if p.p != 2 {
                    return bad("knn supports only p = 2 (Euclidean)");
                }
            }
            Params::Mlp(p) => {
                if !(p.alpha >= 0.0 && p.alpha.is_finite()) {
                    return bad("mlp alpha must be >= 0");
                }
                if p.hidden_layer_sizes == 0 || p.max_iter == 0 || !pos(p.learning_rate_init) {
                    return bad("mlp needs hidden_layer_sizes, max_iter >= 1 and learning_rate_init > 0");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "parameters", rename_all = "snake_case")]
pub enum Learned {
    Logreg(logreg::LogregModel),
    Dtree(dtree::Tree),
    SvmRbf(svm::SvmModel),
    Knn(knn::KnnModel),
    Mlp(mlp::MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub config: ModelConfig,
    pub n_features: usize,
    /// Absent for the decision tree, which sees raw inputs.
    pub scaler: Option<Scaler>,
    pub learned: Learned,
    pub meta: TrainingMeta,
}

fn check_finite(x: ArrayView2<'_, f64>) -> Result<()> {
    if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite input at row {i}, column {j}")));
    }
    Ok(())
}

pub fn fit(config: &ModelConfig, x: ArrayView2<'_, f64>, y: &[u8]) -> Result<TrainedModel> {
    config.validate()?;
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::Validation(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 || d < 1 {
        return Err(Error::Precondition(format!("need n >= 2 and d >= 1, got {n}x{d}")));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Validation("labels must be 0 or 1".into()));
    }
    check_finite(x)?;
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass);
    }

    let scaler = (config.algorithm() != Algorithm::Dtree).then(|| Scaler::fit(x));
    let z: Array2<f64> = match &scaler {
        Some(s) => s.transform(x),
        None => x.to_owned(),
    };
    let zv = z.view();
    let (learned, meta) = match &config.params {
        Params::Logreg(p) => {
            let (m, meta) = logreg::fit(zv, y, p);
            (Learned::Logreg(m), meta)
        }
        Params::Dtree(p) => {
            let t = dtree::fit(zv, y, p);
            let meta = TrainingMeta { iterations: t.nodes.len(), converged: true };
            (Learned::Dtree(t), meta)
        }
        Params::SvmRbf(p) => {
            let (m, meta) = svm::fit(zv, y, p, config.seed);
            (Learned::SvmRbf(m), meta)
        }
        Params::Knn(p) => {
            let m = knn::KnnModel {
                rows: z.rows().into_iter().map(|r| r.to_vec()).collect(),
                labels: y.to_vec(),
                k: p.n_neighbors,
                weights: p.weights,
            };
            (Learned::Knn(m), TrainingMeta { iterations: 0, converged: true })
        }
        Params::Mlp(p) => {
            let (m, meta) = mlp::fit(zv, y, p, config.seed);
            (Learned::Mlp(m), meta)
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        n_features: d,
        scaler,
        learned,
        meta,
    })
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm()
    }

    fn prepare(&self, row: &[f64]) -> Vec<f64> {
        match &self.scaler {
            Some(s) => s.transform_row(row),
            None => row.to_vec(),
        }
    }

    fn check(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        check_finite(x)
    }

    /// Probability and margin for one raw row of the right width.
    pub fn score_row(&self, row: &[f64]) -> (f64, f64) {
        let z = self.prepare(row);
        match &self.learned {
            Learned::Logreg(m) => {
                let f = m.margin(&z);
                (logreg::sigmoid(f), f)
            }
            Learned::Dtree(t) => {
                let p = t.proba(&z);
                (p, p)
            }
            Learned::SvmRbf(m) => {
                let f = m.decision(&z);
                (m.proba_from_decision(f), f)
            }
            Learned::Knn(m) => {
                let p = m.proba(&z);
                (p, p)
            }
            Learned::Mlp(m) => {
                let f = m.margin(&z);
                (logreg::sigmoid(f), f)
            }
        }
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.rows().into_iter().map(|r| self.score_row(&r.to_vec()).0).collect())
    }

    /// 1 iff the probability is at least 0.5.
    pub fn predict_label(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        Ok(self.predict_proba(x)?.into_iter().map(label_of).collect())
    }

    /// Model output on its natural additive scale: log-odds for logistic
    /// regression and the perceptron, the decision value for the SVM, and the
    /// probability itself for the tree and nearest neighbours.
    pub fn margin(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.rows().into_iter().map(|r| self.score_row(&r.to_vec()).1).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!("unsupported model format version {}", m.format_version)));
        }
        Ok(m)
    }
}

pub fn label_of(p: f64) -> u8 {
    u8::from(p >= 0.5)
}
