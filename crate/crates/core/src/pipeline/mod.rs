//! Resampling, cross-validation, metrics, feature selection and tuning.

pub mod cv;
pub mod experiment;
pub mod hpo;
pub mod metrics;
pub mod resample;
pub mod sbs;

pub use cv::{cross_validate, cross_validate_with, CellResult, MetricSummary, MetricsReport};
pub use experiment::{design_matrix, evaluate, Dataset, FeatureOptions};
pub use hpo::{hpo_search, Assignment, Domain, ParamDef, ParamValue, SearchMethod, SearchSpace, Trial, TrialLog};
pub use metrics::{classification_metrics, roc_auroc, ClassificationMetrics, Confusion, RocCurve};
pub use resample::{downsample_balanced, stratified_kfold, ResamplePlan};
pub use sbs::{sequential_backward_selection, SbsMetric, SbsOptions, SelectionStep, SelectionTrace};
