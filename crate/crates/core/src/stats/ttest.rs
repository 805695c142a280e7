use serde::{Deserialize, Serialize};

use super::dist::t_two_sided_p;
use super::SIGNIFICANCE_ALPHA;
use crate::error::{Error, Result};
use crate::screening::mean_and_sample_variance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TVariant {
    Pooled,
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    #[serde(with = "crate::serde_ext::extended_float")]
    pub statistic: f64,
    pub p: f64,
    pub df: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
    pub significant: bool,
}

/// Two-sample t test of mean(a) - mean(b).
pub fn t_test_two_sample(a: &[f64], b: &[f64], variant: TVariant) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Precondition("t test needs at least two values per sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_and_sample_variance(a);
    let (mb, vb) = mean_and_sample_variance(b);
    let diff = ma - mb;
    let (se2, df) = match variant {
        TVariant::Pooled => {
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (sp2 * (1.0 / na + 1.0 / nb), df)
        }
        TVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
            let df = if denom > 0.0 { se2 * se2 / denom } else { na + nb - 2.0 };
            (se2, df)
        }
    };
    let (statistic, p) = if se2 <= 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = diff / se2.sqrt();
        (t, t_two_sided_p(t, df))
    };
    Ok(TTestResult { statistic, p, df, significant: p < SIGNIFICANCE_ALPHA })
}

/// Sample Pearson correlation with a two-sided t-based p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrResult> {
    if x.len() != y.len() {
        return Err(Error::Precondition("pearson inputs differ in length".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Precondition("pearson needs at least three pairs".into()));
    }
    let r = pearson_r(x, y).ok_or(Error::UndefinedCorrelation)?;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * ((n as f64 - 2.0) / (1.0 - r * r)).sqrt();
        t_two_sided_p(t, n as f64 - 2.0)
    };
    Ok(CorrResult { r, p, n, significant: p < SIGNIFICANCE_ALPHA })
}

/// Pearson r, or `None` when either variable has zero variance.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
