use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal components of the correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaFit {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// `k` unit-length loading vectors, one per component, in descending
    /// eigenvalue order. Each vector's largest-magnitude entry is positive.
    pub loadings: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaFit {
    pub fn n_components(&self) -> usize {
        self.loadings.len()
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }
}

/// Column means and sample standard deviations.
pub fn column_moments(matrix: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let n = matrix.nrows() as f64;
    matrix
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, v.sqrt())
        })
        .unzip()
}

pub fn pca_fit(matrix: ArrayView2<'_, f64>, k: usize) -> Result<PcaFit> {
    let (n, d) = matrix.dim();
    if n < d + 1 {
        return Err(Error::Precondition(format!("PCA needs at least {} rows, got {n}", d + 1)));
    }
    if k == 0 || k > d {
        return Err(Error::Config(format!("component count {k} outside 1..={d}")));
    }
    let (means, sds) = column_moments(matrix);
    for (j, (&m, &s)) in means.iter().zip(&sds).enumerate() {
        if !(s > 1e-12 * m.abs().max(1.0)) {
            return Err(Error::DegenerateColumn(format!("item {}", j + 1)));
        }
    }
    let z = DMatrix::from_fn(n, d, |i, j| (matrix[(i, j)] - means[j]) / sds[j]);
    let corr = (z.transpose() * &z) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(corr);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut loadings = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        loadings.push(v);
        eigenvalues.push(eig.eigenvalues[c].max(0.0));
    }
    // trace of a correlation matrix is d
    let explained_variance_ratio = eigenvalues.iter().map(|l| (l / d as f64).clamp(0.0, 1.0)).collect();
    Ok(PcaFit { means, sds, loadings, eigenvalues, explained_variance_ratio })
}

/// Project rows (standardized with the fit's constants) onto the loadings.
pub fn pca_transform(fit: &PcaFit, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let d = fit.n_features();
    if rows.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rows.ncols() });
    }
    let k = fit.n_components();
    let mut out = Array2::zeros((rows.nrows(), k));
    for (i, row) in rows.rows().into_iter().enumerate() {
        for (c, load) in fit.loadings.iter().enumerate() {
            out[(i, c)] = row
                .iter()
                .zip(load)
                .enumerate()
                .map(|(j, (x, w))| (x - fit.means[j]) / fit.sds[j] * w)
                .sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn random_matrix(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seed::rng(seed);
        Array2::from_shape_fn((n, 7), |(_, j)| rng.random::<f64>() * (j + 1) as f64)
    }

    #[test]
    fn rank_one_data() {
        let t: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.1).collect();
        let m = Array2::from_shape_fn((20, 7), |(i, j)| (j as f64 + 1.0) * t[i] + j as f64);
        let fit = pca_fit(m.view(), 7).unwrap();
        assert!((fit.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(fit.explained_variance_ratio[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn spectral_identities() {
        let m = random_matrix(200, 3);
        let fit = pca_fit(m.view(), 7).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                let dot: f64 = fit.loadings[a].iter().zip(&fit.loadings[b]).map(|(x, y)| x * y).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9);
            }
        }
        assert!((fit.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(fit.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn mean_row_maps_to_origin_and_scaling_is_linear() {
        let m = random_matrix(50, 9);
        let fit = pca_fit(m.view(), 3).unwrap();
        let mean_row = Array2::from_shape_vec((1, 7), fit.means.clone()).unwrap();
        let z = pca_transform(&fit, mean_row.view()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));

        let row = m.row(4).to_owned();
        let doubled: Vec<f64> = row.iter().zip(&fit.means).map(|(x, mu)| mu + 2.0 * (x - mu)).collect();
        let a = pca_transform(&fit, row.insert_axis(ndarray::Axis(0)).view()).unwrap();
        let b = pca_transform(&fit, Array2::from_shape_vec((1, 7), doubled).unwrap().view()).unwrap();
        for c in 0..3 {
            assert!((b[(0, c)] - 2.0 * a[(0, c)]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_is_rejected() {
        let mut m = random_matrix(20, 1);
        m.column_mut(4).fill(3.0);
        match pca_fit(m.view(), 2) {
            Err(Error::DegenerateColumn(c)) => assert_eq!(c, "item 5"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sign_convention() {
        let fit = pca_fit(random_matrix(80, 5).view(), 7).unwrap();
        for v in &fit.loadings {
            let max = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            assert!(v.contains(&max));
        }
    }
}
