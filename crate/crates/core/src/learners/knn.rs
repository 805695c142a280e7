//! Brute-force k-nearest-neighbour classifier on standardized inputs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    #[default]
    Uniform,
    Distance,
}

/// Search structure names are accepted for compatibility; the search is
/// always exhaustive, which returns the same neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchAlgorithm {
    #[default]
    Auto,
    BallTree,
    KdTree,
    Brute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub n_neighbors: usize,
    #[serde(default)]
    pub weights: Weights,
    /// Serialized as `search_algorithm` so it cannot collide with the model tag.
    #[serde(default, rename = "search_algorithm")]
    pub algorithm: SearchAlgorithm,
    #[serde(default = "default_leaf")]
    pub leaf_size: usize,
    /// Minkowski exponent; only 2 (Euclidean) is supported.
    #[serde(default = "default_p")]
    pub p: u32,
}

fn default_p() -> u32 {
    2
}

fn default_leaf() -> usize {
    30
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { n_neighbors: 5, weights: Weights::Uniform, algorithm: SearchAlgorithm::Auto, leaf_size: 30, p: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub k: usize,
    pub weights: Weights,
}

impl KnnModel {
    /// Indices and Euclidean distances of the k nearest training rows,
    /// ordered by distance then index.
    pub fn neighbours(&self, z: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d.truncate(self.k.min(self.rows.len()));
        d
    }

    pub fn proba(&self, z: &[f64]) -> f64 {
        let nb = self.neighbours(z);
        match self.weights {
            Weights::Uniform => {
                nb.iter().filter(|(i, _)| self.labels[*i] == 1).count() as f64 / nb.len() as f64
            }
            Weights::Distance => {
                // Exact matches take all the weight.
                let exact: Vec<usize> = nb.iter().filter(|(_, d)| *d == 0.0).map(|(i, _)| *i).collect();
                if !exact.is_empty() {
                    return exact.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / exact.len() as f64;
                }
                let total: f64 = nb.iter().map(|(_, d)| 1.0 / d).sum();
                nb.iter().filter(|(i, _)| self.labels[*i] == 1).map(|(_, d)| 1.0 / d).sum::<f64>() / total
            }
        }
    }
}
