use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Quantile by linear interpolation at position `q * (n - 1)` of the sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(sample: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted_copy(sample), q)
}

pub fn median(sample: &[f64]) -> f64 {
    quantile(sample, 0.5)
}

/// Median and quartiles. Panics on an empty sample.
pub fn descriptive(sample: &[f64]) -> Descriptive {
    assert!(!sample.is_empty(), "descriptive statistics of an empty sample");
    let s = sorted_copy(sample);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    Descriptive { median: quantile_sorted(&s, 0.5), q1, q3, iqr: q3 - q1 }
}
