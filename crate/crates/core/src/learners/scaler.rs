use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Per-feature standardization constants. Zero-spread features get sd 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaler {
    /// Population standard deviation, as the usual standard scaler does.
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let (mean, sd) = x
            .columns()
            .into_iter()
            .map(|c| {
                let m = c.sum() / n;
                let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                let s = v.sqrt();
                (m, if s > 1e-12 * m.abs().max(1.0) { s } else { 1.0 })
            })
            .unzip();
        Scaler { mean, sd }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.dim(), |(i, j)| (x[(i, j)] - self.mean[j]) / self.sd[j])
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.sd[j]).collect()
    }
}
