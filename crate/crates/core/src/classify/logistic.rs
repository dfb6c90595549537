use serde::{Deserialize, Serialize};

use super::{ClassifierKind, ClassifierModel, LabeledDataset, Standardizer, TrainingMetadata};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    /// Penalty on the weights (not the bias), scaled by 1/n in the objective.
    pub l2: f64,
    /// Maximum number of gradient steps.
    pub epochs: usize,
    pub standardize: bool,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1.0, epochs: 500, standardize: true, tolerance: 1e-8 }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus `l2 / (2n) * |w|^2`, with its gradient
/// with respect to `(w, b)`.
pub fn logistic_objective(x: &[Vec<f64>], y: &[bool], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = dot(w, row) + b;
        let t = if label { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    let sq: f64 = w.iter().map(|v| v * v).sum();
    loss = loss / n + 0.5 * l2 / n * sq;
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 / n * wi;
    }
    (loss, gw, gb / n)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch gradient descent with Armijo backtracking.
pub fn train_logistic(data: &LabeledDataset, config: &LogisticConfig) -> Result<ClassifierModel> {
    if !(config.l2 >= 0.0 && config.l2.is_finite()) {
        return Err(Error::Config(format!("l2 must be a finite non-negative number, got {}", config.l2)));
    }
    data.require_both_classes()?;
    let std = Standardizer::fit(data, config.standardize);
    let x = std.transform_all(data);
    let y = data.labels();
    let d = data.feature_len();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = logistic_objective(&x, &y, &w, b, config.l2);
    let mut step = 1.0;
    let mut iterations = 0;
    for epoch in 0..config.epochs {
        let gnorm2: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() < config.tolerance {
            break;
        }
        step *= 2.0;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let b_new = b - step * gb;
            let (l_new, gw_new, gb_new) = logistic_objective(&x, &y, &w_new, b_new, config.l2);
            if !l_new.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            if l_new <= loss - 0.5 * step * gnorm2 {
                w = w_new;
                b = b_new;
                loss = l_new;
                gw = gw_new;
                gb = gb_new;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // no descent possible at machine precision
                break;
            }
        }
        iterations = epoch + 1;
        if step < 1e-20 {
            break;
        }
    }
    log::debug!("logistic regression: {iterations} steps, loss {loss:.6}");
    let (weights, bias) = std.fold_back(&w, b);
    ClassifierModel::new(
        ClassifierKind::LogisticRegression,
        weights,
        bias,
        None,
        TrainingMetadata::from_dataset(data, iterations, serde_json::to_value(config).ok()),
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::classify::{predict_score, Sample};
    use crate::Label;

    fn ds(rows: Vec<(Vec<f64>, bool)>) -> LabeledDataset {
        let samples = rows
            .into_iter()
            .enumerate()
            .map(|(i, (f, l))| Sample { id: i as u64, features: f, label: Label::from_positive(l) })
            .collect();
        LabeledDataset::new("t", samples).unwrap()
    }

    pub(crate) fn separable() -> LabeledDataset {
        let mut rows = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 4.0;
            rows.push((vec![2.0 + t.sin(), 1.0 + t.cos()], true));
            rows.push((vec![-2.0 + t.cos(), -1.0 + t.sin()], false));
        }
        ds(rows)
    }

    #[test]
    fn separable_training_accuracy() {
        let data = separable();
        let m = train_logistic(&data, &LogisticConfig::default()).unwrap();
        for s in &data.samples {
            let p = predict_score(&m, &s.features).unwrap();
            assert_eq!(p >= 0.5, s.label.is_positive());
        }
    }

    #[test]
    fn constant_features_recover_base_rate() {
        for standardize in [true, false] {
            let rows: Vec<_> = (0..40).map(|i| (vec![3.0, -1.0], i % 4 == 0)).collect();
            let m = train_logistic(&ds(rows), &LogisticConfig { standardize, ..Default::default() }).unwrap();
            let expected = (0.25f64 / 0.75).ln();
            assert!(m.weights.iter().all(|w| w.abs() < 1e-3), "{:?}", m.weights);
            let logit = m.bias + m.weights[0] * 3.0 - m.weights[1];
            assert!((logit - expected).abs() < 1e-3, "{logit} vs {expected}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = vec![vec![0.3, -1.2, 2.0], vec![1.5, 0.2, -0.7], vec![-0.4, 0.9, 0.1], vec![0.0, 0.5, 1.1]];
        let y = vec![true, false, true, false];
        let w = vec![0.2, -0.4, 0.7];
        let b = 0.1;
        let (_, gw, gb) = logistic_objective(&x, &y, &w, b, 0.8);
        let h = 1e-6;
        for k in 0..3 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let fd = (logistic_objective(&x, &y, &wp, b, 0.8).0 - logistic_objective(&x, &y, &wm, b, 0.8).0) / (2.0 * h);
            assert!((fd - gw[k]).abs() <= 1e-5 * gw[k].abs().max(1e-3), "{fd} vs {}", gw[k]);
        }
        let fd = (logistic_objective(&x, &y, &w, b + h, 0.8).0 - logistic_objective(&x, &y, &w, b - h, 0.8).0) / (2.0 * h);
        assert!((fd - gb).abs() <= 1e-5 * gb.abs().max(1e-3));
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![(vec![1.0], true), (vec![2.0], true)];
        assert!(matches!(train_logistic(&ds(rows), &LogisticConfig::default()), Err(Error::SingleClass)));
    }
}
