//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values.
//! Ties between equally good splits go to the lowest feature index, then the
//! smallest threshold.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtreeParams {
    #[serde(default)]
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for DtreeParams {
    fn default() -> Self {
        DtreeParams { criterion: Criterion::Gini, max_depth: None, min_samples_split: 2, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub n: usize,
    pub n_pos: usize,
    /// `(feature, threshold, left, right)`; rows with value <= threshold go left.
    pub split: Option<(usize, f64, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    params: &'a DtreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let total_pos: usize = rows.iter().map(|&r| usize::from(self.y[r])).sum();
        let leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in 0..self.x.ncols() {
            sorted.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            let mut left_pos = 0;
            for i in 0..n - 1 {
                left_pos += usize::from(self.y[sorted[i]]);
                let (lo, hi) = (self.x[(sorted[i], f)], self.x[(sorted[i + 1], f)]);
                if lo == hi {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                if nl < leaf || nr < leaf {
                    continue;
                }
                let score = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                let better = match best {
                    None => true,
                    Some((s, _, _)) => score < s - 1e-12,
                };
                if better {
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let n_pos = rows.iter().map(|&r| usize::from(self.y[r])).sum();
        let id = self.nodes.len();
        self.nodes.push(Node { n, n_pos, split: None });
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        let pure = n_pos == 0 || n_pos == n;
        if !depth_ok || pure || n < self.params.min_samples_split.max(2) {
            return id;
        }
        if let Some((f, t)) = self.best_split(&rows) {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[(i, f)] <= t);
            let left = self.grow(l, depth + 1);
            let right = self.grow(r, depth + 1);
            self.nodes[id].split = Some((f, t, left, right));
        }
        id
    }
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], params: &DtreeParams) -> Tree {
    let mut b = Builder { x, y, params, nodes: Vec::new() };
    b.grow((0..x.nrows()).collect(), 0);
    Tree { nodes: b.nodes }
}

impl Tree {
    pub fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some((f, t, l, r)) = node.split {
            node = &self.nodes[if row[f] <= t { l } else { r }];
        }
        node
    }

    /// Fraction of positive training rows in the leaf reached by `row`.
    pub fn proba(&self, row: &[f64]) -> f64 {
        let leaf = self.leaf_for(row);
        leaf.n_pos as f64 / leaf.n as f64
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: usize) -> usize {
            match t.nodes[id].split {
                None => 0,
                Some((_, _, l, r)) => 1 + go(t, l).max(go(t, r)),
            }
        }
        go(self, 0)
    }
}
