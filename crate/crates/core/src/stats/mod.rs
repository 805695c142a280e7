//! Hypothesis tests, correlation, quadratic regression and descriptive summaries.

pub mod anova;
pub mod descriptive;
pub mod dist;
pub mod mwu;
pub mod ols;
pub mod ttest;

pub use anova::{anova_oneway, AnovaResult};
pub use descriptive::{descriptive, median, quantile, quantile_sorted, Descriptive};
pub use mwu::{mann_whitney_u, midranks, UMethod, UMode, UTestResult};
pub use ols::{quadratic_ols, RegressionFit};
pub use ttest::{pearson, pearson_r, t_test_two_sample, CorrResult, TTestResult, TVariant};

/// Significance level used to annotate results. Never used to filter.
pub const SIGNIFICANCE_ALPHA: f64 = 0.01;
