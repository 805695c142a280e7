//! Quadratic least squares `y = b0 + b1 x + b2 x^2` with classical inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dist::{f_sf, t_critical, t_two_sided_p};
use crate::error::{Error, Result};

pub const N_COEF: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// (intercept, linear, quadratic)
    pub beta: [f64; N_COEF],
    pub se: [f64; N_COEF],
    pub t: [f64; N_COEF],
    pub p: [f64; N_COEF],
    pub ci95: [[f64; 2]; N_COEF],
    pub r2: f64,
    pub adj_r2: f64,
    #[serde(with = "crate::serde_ext::extended_float")]
    pub f_model: f64,
    pub p_model: f64,
    pub n: usize,
    pub rss: f64,
}

fn design(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), N_COEF, |i, j| x[i].powi(j as i32))
}

pub fn quadratic_ols(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return Err(Error::Precondition("x and y differ in length".into()));
    }
    let n = x.len();
    if n <= N_COEF {
        return Err(Error::Underdetermined { needed: N_COEF, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in regression input".into()));
    }
    let xm = design(x);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    for j in 0..N_COEF {
        let col_norm = xm.column(j).norm();
        if r[(j, j)].abs() <= 1e-10 * col_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularDesign);
        }
    }
    let qty = qr.q().transpose() * &yv;
    let beta_v = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign)?;
    // (X'X)^-1 = R^-1 R^-T
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(N_COEF, N_COEF))
        .ok_or(Error::SingularDesign)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &yv - &xm * &beta_v;
    let rss = resid.norm_squared();
    let df = (n - N_COEF) as f64;
    let sigma2 = rss / df;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();

    let tcrit = t_critical(0.05, df);
    let mut fit = RegressionFit {
        beta: [0.0; N_COEF],
        se: [0.0; N_COEF],
        t: [0.0; N_COEF],
        p: [0.0; N_COEF],
        ci95: [[0.0; 2]; N_COEF],
        r2: 0.0,
        adj_r2: 0.0,
        f_model: 0.0,
        p_model: 1.0,
        n,
        rss,
    };
    for j in 0..N_COEF {
        let b = beta_v[j];
        let se = (sigma2 * xtx_inv[(j, j)]).max(0.0).sqrt();
        let t = if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        };
        fit.beta[j] = b;
        fit.se[j] = se;
        fit.t[j] = t;
        fit.p[j] = t_two_sided_p(t, df);
        fit.ci95[j] = [b - tcrit * se, b + tcrit * se];
    }
    if tss > 0.0 {
        fit.r2 = (1.0 - rss / tss).clamp(0.0, 1.0);
        fit.adj_r2 = 1.0 - (1.0 - fit.r2) * (n as f64 - 1.0) / df;
        let ess = (tss - rss).max(0.0);
        if rss > 0.0 {
            fit.f_model = (ess / 2.0) / (rss / df);
            fit.p_model = f_sf(fit.f_model, 2.0, df);
        } else {
            fit.f_model = f64::INFINITY;
            fit.p_model = 0.0;
        }
    }
    Ok(fit)
}

impl RegressionFit {
    /// Residuals `y - X beta` for the given data.
    pub fn residuals(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| yi - (self.beta[0] + self.beta[1] * xi + self.beta[2] * xi * xi))
            .collect()
    }
}
