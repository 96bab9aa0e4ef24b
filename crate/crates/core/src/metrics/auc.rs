use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of predictions equal to their label.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::dimension("predictions", labels.len(), predictions.len()));
    }
    if labels.is_empty() {
        return Err(Error::validation("accuracy of an empty set"));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Positive-class scores with binary labels (1 = positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredOutcomes {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredOutcomes {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::dimension("outcome labels", scores.len(), labels.len()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("scores must be finite".into()));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::validation("outcome labels must be 0 or 1"));
        }
        Ok(Self { scores, labels })
    }

    pub fn from_usize_labels(scores: Vec<f64>, labels: &[usize]) -> Result<Self> {
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::validation("outcome labels must be 0 or 1"));
        }
        Self::new(scores, labels.iter().map(|&y| y as u8).collect())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub(crate) fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&s, &y) in self.scores.iter().zip(&self.labels) {
            if y == 1 {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        (pos, neg)
    }

    pub(crate) fn require_classes(&self, min_each: usize) -> Result<()> {
        let (p, n) = (self.positives(), self.negatives());
        if p < min_each || n < min_each {
            return Err(Error::validation(format!(
                "need at least {min_each} positive and {min_each} negative cases, got {p} and {n}"
            )));
        }
        Ok(())
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = 0.5 * ((start + 1 + end) as f64);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Mann–Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counting one half.
pub fn auc(outcomes: &ScoredOutcomes) -> Result<f64> {
    outcomes.require_classes(1)?;
    let ranks = midranks(outcomes.scores());
    let m = outcomes.positives() as f64;
    let n = outcomes.negatives() as f64;
    let rank_sum: f64 = ranks
        .iter()
        .zip(outcomes.labels())
        .filter(|(_, &y)| y == 1)
        .map(|(r, _)| r)
        .sum();
    Ok((rank_sum - m * (m + 1.0) / 2.0) / (m * n))
}

/// ROC curve as `(false positive rate, true positive rate)` points from
/// `(0, 0)` to `(1, 1)`, one point per distinct score.
pub fn roc_points(outcomes: &ScoredOutcomes) -> Result<Vec<(f64, f64)>> {
    outcomes.require_classes(1)?;
    let p = outcomes.positives() as f64;
    let n = outcomes.negatives() as f64;
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&i, &j| outcomes.scores[j].total_cmp(&outcomes.scores[i]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = outcomes.scores[order[i]];
        while i < order.len() && outcomes.scores[order[i]] == s {
            if outcomes.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
    }
    Ok(points)
}
