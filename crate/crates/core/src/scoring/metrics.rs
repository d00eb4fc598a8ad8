//! Binary classification metrics: confusion-matrix rates, rank-based AUC,
//! and within-k ordinal accuracy.

use crate::error::{Error, Result};
use crate::scoring::Severity;

/// Counts plus the derived rates. Any rate whose denominator is zero is
/// reported as 0 with `zero_denominator` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMetrics {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub zero_denominator: bool,
}

impl ConfusionMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionMetrics {
        let mut zero = false;
        let mut rate = |num: usize, den: usize| -> f64 {
            if den == 0 {
                zero = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let sensitivity = rate(tp, tp + fn_);
        let specificity = rate(tn, tn + fp);
        let precision = rate(tp, tp + fp);
        let accuracy = rate(tp + tn, tp + fp + tn + fn_);
        let f1 = rate(2 * tp, 2 * tp + fp + fn_);
        ConfusionMetrics {
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
            sensitivity,
            specificity,
            precision,
            accuracy,
            f1,
            zero_denominator: zero,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

pub fn confusion_metrics(pred: &[bool], truth: &[bool]) -> Result<ConfusionMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "prediction and truth lengths differ: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionMetrics::from_counts(tp, fp, tn, fn_))
}

/// Area under the ROC curve by the rank statistic; tied scores count half.
/// Requires both classes present and no NaN scores.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "score and label lengths differ: {} vs {}",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("no samples for AUC".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score in AUC input".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput(
            "AUC is undefined when only one class is present".into(),
        ));
    }

    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Average 1-based rank within each tie group.
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }

    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of recordings whose predicted severity is within `k - 1`
/// ordinal steps of the truth (`k = 1` is exact agreement).
pub fn acc_at_k(truth: &[Severity], pred: &[Severity], k: usize) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "truth and prediction lengths differ: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("no recordings to score".into()));
    }
    let hits = truth
        .iter()
        .zip(pred)
        .filter(|(t, p)| t.rank().abs_diff(p.rank()) < k)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}
