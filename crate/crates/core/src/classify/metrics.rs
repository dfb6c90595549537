use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// 1-based ranks with ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the mean rank
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via the rank-sum identity.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` for score-free predictors such as keyword matching.
    pub auroc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    /// False when nothing was predicted positive (precision reported as 0).
    pub precision_defined: bool,
    pub threshold: f64,
    pub confusion: Confusion,
    /// `(fpr, tpr)` after each distinct score, from `(0, 0)` to `(1, 1)`.
    pub roc: Vec<(f64, f64)>,
    /// `(recall, precision)` after each distinct score.
    pub pr: Vec<(f64, f64)>,
}

pub fn confusion(predicted: &[bool], labels: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &y) in predicted.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

fn precision_recall(c: &Confusion) -> (f64, f64, bool) {
    let predicted = c.tp + c.fp;
    let precision = if predicted == 0 { 0.0 } else { c.tp as f64 / predicted as f64 };
    let actual = c.tp + c.fn_;
    let recall = if actual == 0 { 0.0 } else { c.tp as f64 / actual as f64 };
    (precision, recall, predicted > 0)
}

/// Metrics for scored predictions; a score ≥ `threshold` predicts a
/// problem report.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport> {
    let auc = auroc(scores, labels)?;
    let predicted: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let conf = confusion(&predicted, labels);
    let (precision, recall, precision_defined) = precision_recall(&conf);
    let (roc, pr) = curves(scores, labels);
    Ok(EvalReport {
        auroc: Some(auc),
        precision,
        recall,
        precision_defined,
        threshold,
        confusion: conf,
        roc,
        pr,
    })
}

/// Metrics for hard predictions with no ranking (AUROC not available).
pub fn evaluate_predictions(predicted: &[bool], labels: &[bool]) -> Result<EvalReport> {
    if predicted.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), found: predicted.len() });
    }
    let conf = confusion(predicted, labels);
    let (precision, recall, precision_defined) = precision_recall(&conf);
    Ok(EvalReport {
        auroc: None,
        precision,
        recall,
        precision_defined,
        threshold: 0.5,
        confusion: conf,
        roc: Vec::new(),
        pr: Vec::new(),
    })
}

fn curves(scores: &[f64], labels: &[bool]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut roc = vec![(0.0, 0.0)];
    let mut pr = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if labels[order[end]] {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        roc.push((fp as f64 / neg, tp as f64 / pos));
        pr.push((tp as f64 / pos, tp as f64 / (tp + fp) as f64));
        start = end;
    }
    (roc, pr)
}
