//! Ranking metrics: precision/recall breakeven point and ROC.

use crate::error::{Error, Result};
use crate::oscillator::Label;

/// Indices sorted by decreasing score; equal scores keep index order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

fn check(scores: &[f64], labels: &[Label]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    if pos == 0 {
        return Err(Error::invalid("need at least one positive label"));
    }
    Ok(pos)
}

/// Fraction of positives among the `N+` highest-scored instances.
pub fn prbp(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let pos = check(scores, labels)?;
    let hits = ranking(scores)
        .iter()
        .take(pos)
        .filter(|&&i| labels[i].is_positive())
        .count();
    Ok(hits as f64 / pos as f64)
}

/// PRBP of a single raw column used as the score.
pub fn simple_classifier_prbp(column: &[f64], labels: &[Label]) -> Result<f64> {
    prbp(column, labels)
}

/// `(FPR, TPR)` points of the threshold sweep, from `(0, 0)` to `(1, 1)`.
/// Instances with equal scores enter together.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<Vec<(f64, f64)>> {
    let pos = check(scores, labels)?;
    let neg = labels.len() - pos;
    if neg == 0 {
        return Err(Error::invalid("need at least one negative label"));
    }
    let order = ranking(scores);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn auc(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    Ok(auc(&roc_curve(scores, labels)?))
}
