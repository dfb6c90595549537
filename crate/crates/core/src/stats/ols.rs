use serde::{Deserialize, Serialize};

use super::special::{normal_quantile, t_two_sided_p};
use crate::{Error, Result};

/// Named columns of a design matrix. Include an explicit intercept column
/// when one is wanted; R² is always computed about the mean of `y`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new() -> Self {
        Design::default()
    }

    pub fn with_intercept(n: usize) -> Self {
        Design { names: vec!["(Intercept)".into()], columns: vec![vec![1.0; n]] }
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(column);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `None` when the fit is exact (zero residual variance).
    pub t_values: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub df: usize,
    pub rss: f64,
    pub exact_fit: bool,
}

impl RegressionResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn sigma(&self) -> f64 {
        (self.rss / self.df as f64).sqrt()
    }
}

// Relative residual norm below which a column counts as a linear combination
// of the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Least squares by Householder QR. Columns are reduced in order; a column
/// that is (numerically) spanned by earlier ones makes the fit fail with the
/// names of every such column.
pub fn ols_fit(design: &Design, y: &[f64]) -> Result<RegressionResult> {
    let n = y.len();
    let p = design.columns.len();
    for col in &design.columns {
        if col.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: col.len() });
        }
    }
    if p == 0 {
        return Err(Error::Config("design has no columns".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!("{n} observations for {p} parameters")));
    }
    if y.iter().chain(design.columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input".into()));
    }

    // a: working copy, column-major; r: upper triangle; qty: Q'y
    let mut a: Vec<Vec<f64>> = design.columns.clone();
    let mut qty = y.to_vec();
    let mut r = vec![vec![0.0; p]; p];
    let mut dependent = Vec::new();
    for k in 0..p {
        let orig = design.columns[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if orig == 0.0 || norm <= RANK_TOL * orig {
            dependent.push(design.names[k].clone());
            continue;
        }
        if !dependent.is_empty() {
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let s: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= s * vi;
            }
        };
        for col in a.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut qty[k..]);
        for j in k..p {
            r[k][j] = a[j][k];
        }
    }
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }

    let rinv = invert_upper(&r);
    let coefficients: Vec<f64> = (0..p).map(|i| (i..p).map(|j| rinv[i][j] * qty[j]).sum()).collect();
    let fitted: Vec<f64> = (0..n)
        .map(|row| design.columns.iter().zip(&coefficients).map(|(c, b)| c[row] * b).sum())
        .collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let exact_fit = rss <= 1e-24 * yy.max(f64::MIN_POSITIVE);
    let r_squared = if sst > 0.0 { (1.0 - rss / sst).clamp(0.0, 1.0) } else { 0.0 };
    let df = n - p;
    let sigma2 = rss / df as f64;
    let std_errors: Vec<f64> = (0..p)
        .map(|i| (sigma2 * (i..p).map(|j| rinv[i][j] * rinv[i][j]).sum::<f64>()).sqrt())
        .collect();
    let (t_values, p_values) = if exact_fit {
        (vec![None; p], vec![None; p])
    } else {
        coefficients
            .iter()
            .zip(&std_errors)
            .map(|(b, se)| {
                let t = b / se;
                (Some(t), Some(t_two_sided_p(t, df as f64)))
            })
            .unzip()
    };
    Ok(RegressionResult {
        names: design.names.clone(),
        coefficients,
        std_errors,
        t_values,
        p_values,
        r_squared,
        residuals,
        fitted,
        df,
        rss,
        exact_fit,
    })
}

fn invert_upper(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = r.len();
    let mut inv = vec![vec![0.0; p]; p];
    for j in 0..p {
        inv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / r[i][i];
        }
    }
    inv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `(theoretical normal quantile, sorted standardized residual)`.
    pub qq: Vec<(f64, f64)>,
    /// `(fitted, residual)`.
    pub residual_vs_fitted: Vec<(f64, f64)>,
}

/// Q-Q points against the standard normal at probabilities `(i - 0.5) / n`.
pub fn diagnostics(result: &RegressionResult) -> Diagnostics {
    let n = result.residuals.len();
    let sigma = result.sigma();
    let mut standardized: Vec<f64> = result
        .residuals
        .iter()
        .map(|e| if sigma > 0.0 && !result.exact_fit { e / sigma } else { 0.0 })
        .collect();
    standardized.sort_by(f64::total_cmp);
    let qq = standardized
        .into_iter()
        .enumerate()
        .map(|(i, s)| (normal_quantile((i as f64 + 0.5) / n as f64), s))
        .collect();
    let residual_vs_fitted = result.fitted.iter().copied().zip(result.residuals.iter().copied()).collect();
    Diagnostics { qq, residual_vs_fitted }
}
