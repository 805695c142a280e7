//! Response-time analytics for psychometric scale administrations.
//!
//! The crate turns per-item response-time sequences into screened cohorts,
//! statistical analyses, engineered features, trained classifiers and
//! Shapley-value explanations. Module map:
//!
//! - [`model`]: records, cohorts, JSONL/CSV ingestion and export
//! - [`screening`]: cleaning, careless-response exclusion, scoring and labels
//! - [`stats`]: Mann-Whitney U, ANOVA, t tests, correlation, quadratic OLS
//! - [`features`]: per-participant feature vectors and correlation pruning
//! - [`dimred`]: PCA and exact t-SNE embeddings
//! - [`learners`]: five binary classifiers behind one fit/predict contract
//! - [`pipeline`]: balanced resampling, cross-validation, metrics, selection, tuning
//! - [`explain`]: linear and kernel SHAP attributions
//! - [`synthgen`]: synthetic cohorts with planted, recoverable parameters
//! - [`report`]: plot-ready data bundles

pub mod dimred;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod screening;
pub mod seed;
pub(crate) mod serde_ext;
pub mod explain;
pub mod features;
pub mod learners;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use model::{Cohort, Format, ParticipantRecord, ValidationIssue, N_ITEMS};
