use serde::{Deserialize, Serialize};

use super::dist::f_sf;
use super::SIGNIFICANCE_ALPHA;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `inf` when groups differ but have no within-group spread.
    #[serde(with = "crate::serde_ext::extended_float")]
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub significant: bool,
}

/// One-way ANOVA F test across `groups`.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::Precondition("ANOVA needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(Error::Precondition("every ANOVA group needs at least one value".into()));
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    if n <= k {
        return Err(Error::Precondition(format!("ANOVA needs N > k (N = {n}, k = {k})")));
    }
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_between = k - 1;
    let df_within = n - k;
    // relative guard against round-off in sums of squares
    let scale = groups.iter().flat_map(|g| g.as_ref()).map(|x| (x - grand).powi(2)).sum::<f64>();
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let (f, p) = if ss_within <= tiny && ss_between <= tiny {
        (0.0, 1.0)
    } else if ss_within <= tiny {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_sf(f, df_between as f64, df_within as f64))
    };
    Ok(AnovaResult { f, p, df_between, df_within, ss_between, ss_within, significant: p < SIGNIFICANCE_ALPHA })
}
