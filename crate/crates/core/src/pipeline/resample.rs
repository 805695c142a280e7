//! Balanced downsampling and stratified fold assignment.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const DOWNSAMPLE_TAG: u64 = 0xD0_5A;
const FOLD_TAG: u64 = 0xF0_1D;
const CELL_TAG: u64 = 0xCE_11;

/// How many balanced resamples to draw and from which master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub repeats: usize,
    pub master_seed: u64,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan { repeats: 10, master_seed: 0 }
    }
}

impl ResamplePlan {
    pub fn new(repeats: usize, master_seed: u64) -> Self {
        ResamplePlan { repeats, master_seed }
    }

    pub fn downsample_seed(&self, repeat: usize) -> u64 {
        seed::derive(self.master_seed, &[DOWNSAMPLE_TAG, repeat as u64])
    }

    pub fn fold_seed(&self, repeat: usize) -> u64 {
        seed::derive(self.master_seed, &[FOLD_TAG, repeat as u64])
    }

    /// Seed handed to the estimator trained in cell `(repeat, fold)`.
    pub fn cell_seed(&self, repeat: usize, fold: usize) -> u64 {
        seed::derive(self.master_seed, &[CELL_TAG, repeat as u64, fold as u64])
    }

    pub fn repeat_seeds(&self) -> Vec<u64> {
        (0..self.repeats).map(|r| self.downsample_seed(r)).collect()
    }
}

fn class_indices(y: &[u8]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &v) in y.iter().enumerate() {
        out[usize::from(v == 1)].push(i);
    }
    out
}

/// Row indices of a balanced sample: every minority row plus an equally sized
/// uniform draw without replacement from the majority, in seeded random order.
pub fn downsample_balanced(y: &[u8], seed: u64) -> Result<Vec<usize>> {
    let [neg, pos] = class_indices(y);
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::SingleClass);
    }
    let (minority, mut majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = seed::rng(seed);
    majority.shuffle(&mut rng);
    majority.truncate(minority.len());
    let mut out = minority;
    out.extend(majority);
    out.shuffle(&mut rng);
    Ok(out)
}

/// `k` disjoint, sorted test-index sets covering `0..y.len()`, with each
/// class dealt round-robin so fold class counts differ by at most one.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let classes = class_indices(y);
    if let Some(c) = classes.iter().find(|c| c.len() < k) {
        return Err(Error::Precondition(format!("a class has {} members, fewer than {k} folds", c.len())));
    }
    let mut rng = seed::rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in classes {
        members.shuffle(&mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_keeps_every_minority_row() {
        let mut y = vec![0u8; 1935];
        y.extend(vec![1u8; 166]);
        let idx = downsample_balanced(&y, 3).unwrap();
        assert_eq!(idx.len(), 332);
        assert_eq!(idx.iter().filter(|&&i| y[i] == 1).count(), 166);
        let mut s = idx.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 332);
    }

    #[test]
    fn balanced_input_is_kept_whole() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i >= 50)).collect();
        let mut idx = downsample_balanced(&y, 1).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn downsample_deterministic_and_keeps_minority() {
        let y: Vec<u8> = (0..300).map(|i| u8::from(i % 7 == 0)).collect();
        assert_eq!(downsample_balanced(&y, 9).unwrap(), downsample_balanced(&y, 9).unwrap());
        let minority = |s| {
            let mut m: Vec<usize> = downsample_balanced(&y, s).unwrap().into_iter().filter(|&i| y[i] == 1).collect();
            m.sort_unstable();
            m
        };
        assert_eq!(minority(1), minority(2));
        assert!(downsample_balanced(&[0, 0, 0], 1).is_err());
    }

    #[test]
    fn kfold_exact_stratification() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i % 2 == 0)).collect();
        let folds = stratified_kfold(&y, 10, 4).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 10);
            assert_eq!(f.iter().filter(|&&i| y[i] == 1).count(), 5);
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(folds, stratified_kfold(&y, 10, 4).unwrap());
    }

    #[test]
    fn kfold_proportions_within_one() {
        let y: Vec<u8> = (0..97).map(|i| u8::from(i % 3 == 0)).collect();
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        for f in stratified_kfold(&y, 10, 5).unwrap() {
            let p = f.iter().filter(|&&i| y[i] == 1).count() as f64;
            assert!((p - pos / 10.0).abs() <= 1.0);
        }
        assert!(stratified_kfold(&[0, 0, 1, 1, 1], 3, 0).is_err());
    }
}
