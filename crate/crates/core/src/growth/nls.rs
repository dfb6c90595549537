use serde::{Deserialize, Serialize};

use super::{model_value, CumulativeSeries, FitMethod, GrowthFit, GrowthParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlsConfig {
    /// Starting growth rates, tried in order with κ₀ = max(Y) and δ₀ = 0.
    pub start_betas: Vec<f64>,
    pub max_iterations: usize,
    /// Converged once an accepted step improves SSE by less than this
    /// fraction.
    pub tolerance: f64,
}

impl Default for NlsConfig {
    fn default() -> Self {
        NlsConfig { start_betas: vec![0.05, 0.01], max_iterations: 200, tolerance: 1e-8 }
    }
}

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;

fn sse_in_domain(p: &GrowthParams, s: &CumulativeSeries) -> f64 {
    s.t.iter().zip(&s.y).map(|(&t, &y)| (y - model_value(p, t)).powi(2)).sum()
}

/// Solves the 3×3 system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct Run {
    params: GrowthParams,
    sse: f64,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

fn levenberg_marquardt(s: &CumulativeSeries, start: GrowthParams, cfg: &NlsConfig, t_min: f64) -> Run {
    let mut p = start;
    let mut sse = sse_in_domain(&p, s);
    let mut trace = vec![sse];
    let mut lambda = LAMBDA_START;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        // normal equations J'J and J'r for residuals r = y - Y(t)
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&t, &y) in s.t.iter().zip(&s.y) {
            let e = (-p.beta * (t - p.delta)).exp();
            let u = 1.0 - e;
            let u4 = u.powi(4);
            let g = [u4 * u, 5.0 * p.kappa * u4 * e * (t - p.delta), -5.0 * p.kappa * u4 * e * p.beta];
            let r = y - p.kappa * u4 * u;
            for i in 0..3 {
                jtr[i] += g[i] * r;
                for j in 0..3 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let accepted = loop {
            if lambda > LAMBDA_MAX {
                break false;
            }
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve3(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let cand = GrowthParams { kappa: p.kappa + step[0], beta: p.beta + step[1], delta: p.delta + step[2] };
            if !cand.is_valid() || cand.delta >= t_min {
                lambda *= 10.0;
                continue;
            }
            let cand_sse = sse_in_domain(&cand, s);
            if cand_sse.is_finite() && cand_sse < sse {
                let improvement = (sse - cand_sse) / sse;
                p = cand;
                sse = cand_sse;
                trace.push(sse);
                lambda = (lambda / 10.0).max(1e-12);
                if improvement < cfg.tolerance {
                    converged = true;
                }
                break true;
            }
            lambda *= 10.0;
        };
        if !accepted {
            // no nearby step lowers the SSE: a local minimum
            converged = true;
            break;
        }
        if converged || sse == 0.0 {
            converged = true;
            break;
        }
    }
    Run { params: p, sse, converged, iterations, trace }
}

/// Levenberg-Marquardt from each configured start; returns the lowest-SSE
/// converged run, or the lowest-SSE run flagged unconverged.
pub fn nls_fit(series: &CumulativeSeries, config: &NlsConfig) -> Result<GrowthFit> {
    if series.len() < 4 {
        return Err(Error::InsufficientData(format!("{}: NLS needs at least 4 points", series.program)));
    }
    if config.start_betas.is_empty() || config.start_betas.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::Config("start_betas must be positive and non-empty".into()));
    }
    let t_min = series.t[0];
    let y_max = series.y.iter().copied().fold(0.0, f64::max);
    let y_min = series.y.iter().copied().fold(f64::INFINITY, f64::min);
    let delta0 = if 0.0 >= t_min { t_min - 1.0 } else { 0.0 };

    let degenerate = y_max == y_min;
    let mut best: Option<(Run, GrowthParams)> = None;
    if y_max > 0.0 {
        for &beta in &config.start_betas {
            let start = GrowthParams { kappa: y_max, beta, delta: delta0 };
            let run = levenberg_marquardt(series, start, config, t_min);
            log::debug!(
                "{} {}: start beta {beta} -> sse {} after {} iterations (converged {})",
                series.program,
                series.category,
                run.sse,
                run.iterations,
                run.converged
            );
            let better = match &best {
                None => true,
                Some((b, _)) => (run.converged, -run.sse) > (b.converged, -b.sse),
            };
            if better {
                best = Some((run, start));
            }
        }
    }
    let Some((run, start)) = best else {
        let params = GrowthParams { kappa: y_max.max(f64::MIN_POSITIVE), beta: config.start_betas[0], delta: delta0 };
        return Ok(GrowthFit {
            params,
            sse: sse_in_domain(&params, series),
            method: FitMethod::Nls,
            converged: false,
            start: Some(params),
            iterations: 0,
            sse_trace: Vec::new(),
            acceptance_rate: None,
            flagged: true,
        });
    };
    // a flat series is fitted equally well by any curve that has already
    // saturated, so the parameters are not identified
    let converged = run.converged && !degenerate;
    Ok(GrowthFit {
        params: run.params,
        sse: run.sse,
        method: FitMethod::Nls,
        converged,
        start: Some(start),
        iterations: run.iterations,
        sse_trace: run.trace,
        acceptance_rate: None,
        flagged: !converged,
    })
}
