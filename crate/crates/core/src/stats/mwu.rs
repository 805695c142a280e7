//! Mann-Whitney U test with midranks, exact or normal-approximation p-values.

use serde::{Deserialize, Serialize};

use super::descriptive::descriptive;
use super::dist::normal_sf;
use super::SIGNIFICANCE_ALPHA;
use crate::error::{Error, Result};

/// Pooled sizes up to this use exact enumeration in [`UMode::Auto`].
pub const AUTO_EXACT_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMode {
    Exact,
    NormalApprox,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U for the first sample: R_a - n_a (n_a + 1) / 2.
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: UMethod,
    pub n_a: usize,
    pub n_b: usize,
    pub median_a: f64,
    pub median_b: f64,
    pub iqr_a: f64,
    pub iqr_b: f64,
    /// Annotation only: p below the fixed significance level.
    pub significant: bool,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the average rank
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], mode: UMode) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("Mann-Whitney U needs at least one value per sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in Mann-Whitney U input".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u_a = ra - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    let method = match mode {
        UMode::Exact => UMethod::Exact,
        UMode::NormalApprox => UMethod::NormalApprox,
        UMode::Auto if na + nb <= AUTO_EXACT_MAX_N => UMethod::Exact,
        UMode::Auto => UMethod::NormalApprox,
    };
    let p = match method {
        UMethod::Exact => exact_p(&ranks, na, u_a),
        UMethod::NormalApprox => normal_p(&ranks, na, nb, u_a),
    };
    let da = descriptive(a);
    let db = descriptive(b);
    Ok(UTestResult {
        u_a,
        u_b,
        p_two_sided: p,
        method,
        n_a: na,
        n_b: nb,
        median_a: da.median,
        median_b: db.median,
        iqr_a: da.iqr,
        iqr_b: db.iqr,
        significant: p < SIGNIFICANCE_ALPHA,
    })
}

/// Permutation distribution of the rank sum of `na` items drawn from the pooled
/// midranks, counted by dynamic programming over doubled ranks (midranks are
/// multiples of 1/2, so doubled ranks are integers).
fn exact_p(ranks: &[f64], na: usize, u_obs: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: number of k-subsets with doubled rank sum s
    let mut ways = vec![vec![0.0_f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=na).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: f64 = ways[na].iter().sum();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let mean = (na * (ranks.len() - na)) as f64 / 2.0;
    let observed = (u_obs - mean).abs();
    let extreme: f64 = ways[na]
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .filter(|(s, _)| ((*s as f64 / 2.0 - offset) - mean).abs() >= observed - 1e-9)
        .map(|(_, &w)| w)
        .sum();
    (extreme / total).min(1.0)
}

/// Tie-corrected normal approximation with a 0.5 continuity correction.
fn normal_p(ranks: &[f64], na: usize, nb: usize, u_a: f64) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let mean = (na * nb) as f64 / 2.0;
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u_a - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_sf(z)).min(1.0)
}
