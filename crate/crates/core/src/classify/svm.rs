use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::dot;
use super::{ClassifierKind, ClassifierModel, LabeledDataset, Standardizer, TrainingMetadata};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// Weight of the mean hinge loss against `|w|^2 / 2`.
    pub c: f64,
    pub epochs: usize,
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 10.0, epochs: 50, standardize: true }
    }
}

/// `|w|^2 / 2 + c * mean(max(0, 1 - y (w.x + b)))` with `y` in {-1, 1}.
pub fn svm_objective(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, c: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &l)| {
            let s = if l { 1.0 } else { -1.0 };
            (1.0 - s * (dot(w, row) + b)).max(0.0)
        })
        .sum();
    0.5 * dot(w, w) + c * hinge / x.len() as f64
}

/// Stochastic subgradient descent with step 1/t (the objective is
/// 1-strongly convex in `w`), then Platt scaling on the training margins.
pub fn train_linear_svm(data: &LabeledDataset, config: &SvmConfig, seed: u64) -> Result<ClassifierModel> {
    if !(config.c >= 0.0 && config.c.is_finite()) {
        return Err(Error::Config(format!("c must be a finite non-negative number, got {}", config.c)));
    }
    data.require_both_classes()?;
    let std = Standardizer::fit(data, config.standardize);
    let x = std.transform_all(data);
    let y = data.labels();
    let d = data.feature_len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut t = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / t as f64;
            let s = if y[i] { 1.0 } else { -1.0 };
            let violated = s * (dot(&w, &x[i]) + b) < 1.0;
            for wk in w.iter_mut() {
                *wk *= 1.0 - eta;
            }
            if violated {
                for (wk, v) in w.iter_mut().zip(&x[i]) {
                    *wk += eta * config.c * s * v;
                }
                b += eta * config.c * s;
            }
        }
        if !(w.iter().all(|v| v.is_finite()) && b.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
    }
    log::debug!("linear svm: objective {:.6}", svm_objective(&x, &y, &w, b, config.c));

    let margins: Vec<f64> = x.iter().map(|row| dot(&w, row) + b).collect();
    let platt = platt_scaling(&margins, &y);
    let (weights, bias) = std.fold_back(&w, b);
    ClassifierModel::new(
        ClassifierKind::LinearSvm,
        weights,
        bias,
        Some(platt),
        TrainingMetadata::from_dataset(data, config.epochs, serde_json::to_value(config).ok()),
    )
}

/// Fits `P(y=1|f) = 1 / (1 + exp(A f + B))` by Newton's method with
/// backtracking and regularized targets (Lin, Lin and Weng's formulation).
pub fn platt_scaling(decision: &[f64], labels: &[bool]) -> (f64, f64) {
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let fval_at = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = fval_at(a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &ti) in decision.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = fval_at(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::debug!("platt scaling: line search failed");
            break;
        }
    }
    (a, b)
}
