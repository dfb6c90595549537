//! Problem-report vs support-request classifiers and their evaluation.

mod folds;
mod logistic;
mod metrics;
mod svm;

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use folds::stratified_folds;
pub use logistic::{logistic_objective, train_logistic, LogisticConfig};
pub use metrics::{auroc, confusion, evaluate, evaluate_predictions, midranks, Confusion, EvalReport};
pub use svm::{platt_scaling, svm_objective, train_linear_svm, SvmConfig};

use crate::features::FeatureRow;
use crate::{Error, Exec, Label, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: Label,
}

/// Labeled feature vectors for one program (or a union of programs).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let len = first.features.len();
            for s in &samples {
                if s.features.len() != len {
                    return Err(Error::LengthMismatch { expected: len, found: s.features.len() });
                }
                if s.features.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("features of question {}", s.id)));
                }
            }
        }
        Ok(LabeledDataset { name: name.into(), samples })
    }

    /// Keeps only the labeled rows.
    pub fn from_feature_rows(name: impl Into<String>, rows: &[FeatureRow]) -> Result<Self> {
        let samples = rows
            .iter()
            .filter_map(|r| r.label.map(|label| Sample { id: r.id, features: r.values.clone(), label }))
            .collect();
        Self::new(name, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// `true` for problem reports.
    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.label.is_positive()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        if self.count(Label::ProblemReport) == 0 || self.count(Label::SupportRequest) == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

/// Per-feature centering and (optionally) scaling learned on the training set;
/// the fitted weights are mapped back so stored models apply to raw features.
/// Centering alone leaves the optimum unchanged because the bias is not
/// penalized, so it is always applied.
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(data: &LabeledDataset, enabled: bool) -> Self {
        let d = data.feature_len();
        if data.is_empty() {
            return Standardizer { mean: vec![0.0; d], scale: vec![1.0; d] };
        }
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for s in &data.samples {
            for (m, v) in mean.iter_mut().zip(&s.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        if !enabled {
            return Standardizer { mean, scale: vec![1.0; d] };
        }
        let mut var = vec![0.0; d];
        for s in &data.samples {
            for ((acc, v), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub(crate) fn transform_all(&self, data: &LabeledDataset) -> Vec<Vec<f64>> {
        data.samples
            .iter()
            .map(|s| s.features.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), sd)| (v - m) / sd).collect())
            .collect()
    }

    pub(crate) fn fold_back(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let weights: Vec<f64> = w.iter().zip(&self.scale).map(|(wk, sd)| wk / sd).collect();
        let bias = b - weights.iter().zip(&self.mean).map(|(wk, m)| wk * m).sum::<f64>();
        (weights, bias)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    LinearSvm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub train_sets: Vec<String>,
    pub n_samples: usize,
    pub n_problem_reports: usize,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl TrainingMetadata {
    pub(crate) fn from_dataset(data: &LabeledDataset, iterations: usize, config: Option<serde_json::Value>) -> Self {
        TrainingMetadata {
            train_sets: vec![data.name.clone()],
            n_samples: data.len(),
            n_problem_reports: data.count(Label::ProblemReport),
            iterations,
            config,
        }
    }
}

/// A linear scorer over raw (unstandardized) features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub feature_len: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub platt: Option<Platt>,
    pub metadata: TrainingMetadata,
}

impl ClassifierModel {
    pub fn new(
        kind: ClassifierKind,
        weights: Vec<f64>,
        bias: f64,
        platt: Option<(f64, f64)>,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        let model = ClassifierModel {
            kind,
            feature_len: weights.len(),
            weights,
            bias,
            platt: platt.map(|(a, b)| Platt { a, b }),
            metadata,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.feature_len {
            return Err(Error::LengthMismatch { expected: self.feature_len, found: self.weights.len() });
        }
        let platt_ok = self.platt.is_none_or(|p| p.a.is_finite() && p.b.is_finite());
        if !(self.bias.is_finite() && platt_ok && self.weights.iter().all(|w| w.is_finite())) {
            return Err(Error::NonFinite("classifier parameters".into()));
        }
        Ok(())
    }

    pub fn margin(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_len {
            return Err(Error::LengthMismatch { expected: self.feature_len, found: features.len() });
        }
        Ok(logistic::dot(&self.weights, features) + self.bias)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let model: ClassifierModel =
            serde_json::from_str(text).map_err(|e| Error::invalid(source, e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// Positive-class probability: the logistic of the margin, or the Platt
/// sigmoid for SVM models.
pub fn predict_score(model: &ClassifierModel, features: &[f64]) -> Result<f64> {
    let m = model.margin(features)?;
    Ok(match model.platt {
        Some(Platt { a, b }) => logistic::sigmoid(-(a * m + b)),
        None => logistic::sigmoid(m),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    Logistic(LogisticConfig),
    LinearSvm(SvmConfig),
}

impl Default for Learner {
    fn default() -> Self {
        Learner::Logistic(LogisticConfig::default())
    }
}

impl Learner {
    /// `seed` only affects the SVM's example order; gradient descent for
    /// logistic regression is deterministic.
    pub fn fit(&self, data: &LabeledDataset, seed: u64) -> Result<ClassifierModel> {
        match self {
            Learner::Logistic(cfg) => train_logistic(data, cfg),
            Learner::LinearSvm(cfg) => train_linear_svm(data, cfg, seed),
        }
    }
}

/// Out-of-fold scores from stratified k-fold cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    /// Metrics over the pooled out-of-fold scores.
    pub report: EvalReport,
    pub ids: Vec<u64>,
    pub scores: Vec<f64>,
    pub fold_of: Vec<usize>,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn cross_validate(data: &LabeledDataset, learner: &Learner, k: usize, seed: u64, exec: Exec) -> Result<CrossValidation> {
    let labels = data.labels();
    let folds = stratified_folds(&labels, k, seed)?;
    let results = exec.map_range(k, |f| -> Result<(Vec<u64>, Vec<(usize, f64)>)> {
        let test: BTreeSet<usize> = folds[f].iter().copied().collect();
        let train_idx: Vec<usize> = (0..data.len()).filter(|i| !test.contains(i)).collect();
        let train = data.subset(&train_idx);
        let model = learner.fit(&train, fold_seed(seed, f))?;
        let scored = folds[f]
            .iter()
            .map(|&i| predict_score(&model, &data.samples[i].features).map(|s| (i, s)))
            .collect::<Result<_>>()?;
        Ok((train.samples.iter().map(|s| s.id).collect(), scored))
    });

    let mut scores = vec![f64::NAN; data.len()];
    let mut fold_of = vec![usize::MAX; data.len()];
    for (f, result) in results.into_iter().enumerate() {
        let (train_ids, scored) = result?;
        let train_ids: BTreeSet<u64> = train_ids.into_iter().collect();
        for (i, s) in scored {
            assert!(!train_ids.contains(&data.samples[i].id), "question {} scored by a model trained on it", data.samples[i].id);
            assert_eq!(fold_of[i], usize::MAX, "question {} scored twice", data.samples[i].id);
            scores[i] = s;
            fold_of[i] = f;
        }
    }
    assert!(fold_of.iter().all(|&f| f != usize::MAX), "every question is scored once");
    let report = evaluate(&scores, &labels, 0.5)?;
    Ok(CrossValidation {
        dataset: data.name.clone(),
        k,
        seed,
        report,
        ids: data.samples.iter().map(|s| s.id).collect(),
        scores,
        fold_of,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub train_sets: Vec<String>,
    pub test_set: String,
    pub n_train: usize,
    pub n_test: usize,
    pub report: EvalReport,
}

/// Trains one model on the union of `train_sets` and evaluates it on
/// `test_set`. Program names and question ids must not overlap.
pub fn transfer_evaluate(
    train_sets: &[LabeledDataset],
    test_set: &LabeledDataset,
    learner: &Learner,
    seed: u64,
) -> Result<(ClassifierModel, TransferReport)> {
    if train_sets.is_empty() {
        return Err(Error::InsufficientData("no training programs".into()));
    }
    let names: Vec<String> = train_sets.iter().map(|d| d.name.clone()).collect();
    if names.contains(&test_set.name) {
        return Err(Error::ProgramOverlap(test_set.name.clone()));
    }
    let test_ids: BTreeSet<u64> = test_set.samples.iter().map(|s| s.id).collect();
    let mut samples = Vec::new();
    for d in train_sets {
        if let Some(s) = d.samples.iter().find(|s| test_ids.contains(&s.id)) {
            return Err(Error::ProgramOverlap(format!("question {} appears in {} and {}", s.id, d.name, test_set.name)));
        }
        samples.extend(d.samples.iter().cloned());
    }
    let union = LabeledDataset::new(names.join("+"), samples)?;
    let mut model = learner.fit(&union, seed)?;
    model.metadata.train_sets = names.clone();
    let scores = test_set
        .samples
        .iter()
        .map(|s| predict_score(&model, &s.features))
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&scores, &test_set.labels(), 0.5)?;
    let summary = TransferReport {
        train_sets: names,
        test_set: test_set.name.clone(),
        n_train: union.len(),
        n_test: test_set.len(),
        report,
    };
    Ok((model, summary))
}

/// ROC and PR points as `curve, x, y` rows for plotting.
pub fn write_curve_tsv<W: Write>(mut w: W, report: &EvalReport) -> Result<()> {
    writeln!(w, "curve\tx\ty")?;
    for (x, y) in &report.roc {
        writeln!(w, "roc\t{x}\t{y}")?;
    }
    for (x, y) in &report.pr {
        writeln!(w, "pr\t{x}\t{y}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: u64, features: Vec<f64>, positive: bool) -> Sample {
        Sample { id, features, label: Label::from_positive(positive) }
    }

    #[test]
    fn predict_score_basics() {
        let meta = TrainingMetadata::default();
        let zero = ClassifierModel::new(ClassifierKind::LogisticRegression, vec![0.0, 0.0], 0.0, None, meta.clone()).unwrap();
        assert_eq!(predict_score(&zero, &[3.0, -4.0]).unwrap(), 0.5);
        assert!(matches!(predict_score(&zero, &[1.0]), Err(Error::LengthMismatch { expected: 2, found: 1 })));
        let one = ClassifierModel::new(ClassifierKind::LogisticRegression, vec![2.0], -1.0, None, meta.clone()).unwrap();
        assert!(predict_score(&one, &[10.0]).unwrap() > 0.99);
        // 2 * 0.75 - 1 = 0.5 -> 1 / (1 + e^-0.5)
        assert!((predict_score(&one, &[0.75]).unwrap() - 0.622_459_331_201_854_6).abs() < 1e-15);
        let svm = ClassifierModel::new(ClassifierKind::LinearSvm, vec![1.0], 0.0, Some((-2.0, 0.5)), meta).unwrap();
        // A f + B = -2 + 0.5 = -1.5 -> 1 / (1 + e^-1.5)
        assert!((predict_score(&svm, &[1.0]).unwrap() - 0.817_574_476_193_643_7).abs() < 1e-15);
    }

    #[test]
    fn non_finite_model_rejected() {
        let r = ClassifierModel::new(ClassifierKind::LogisticRegression, vec![f64::NAN], 0.0, None, Default::default());
        assert!(r.is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let m = ClassifierModel::new(ClassifierKind::LinearSvm, vec![0.25, -1.5], 0.1, Some((-1.0, 0.2)), Default::default()).unwrap();
        assert_eq!(ClassifierModel::from_json(&m.to_json().unwrap(), "m").unwrap(), m);
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let r = LabeledDataset::new("x", vec![sample(1, vec![1.0], true), sample(2, vec![1.0, 2.0], false)]);
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn transfer_rejects_overlap() {
        let a = LabeledDataset::new("a", vec![sample(1, vec![1.0], true), sample(2, vec![-1.0], false)]).unwrap();
        let b = LabeledDataset::new("b", vec![sample(1, vec![1.0], true), sample(3, vec![-1.0], false)]).unwrap();
        let learner = Learner::default();
        assert!(matches!(transfer_evaluate(std::slice::from_ref(&a), &a, &learner, 0), Err(Error::ProgramOverlap(_))));
        assert!(matches!(transfer_evaluate(&[a], &b, &learner, 0), Err(Error::ProgramOverlap(_))));
    }

    #[test]
    fn learner_config_json() {
        let l: Learner = serde_json::from_str(r#"{"kind":"linear_svm","c":2.0}"#).unwrap();
        assert_eq!(l, Learner::LinearSvm(SvmConfig { c: 2.0, ..Default::default() }));
    }
}
