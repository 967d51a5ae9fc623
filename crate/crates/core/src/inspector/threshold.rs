use serde::{Deserialize, Serialize};

use super::InspectorError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    /// Eliminations with `score > threshold` count as cheating.
    pub threshold: f64,
    pub f1: f64,
    /// Set when every score is identical and no cut separates anything.
    pub degenerate: bool,
}

fn f1_of(scores: &[f64], labels: &[bool], cut: impl Fn(f64) -> bool) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
    for (&s, &y) in scores.iter().zip(labels) {
        match (cut(s), y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// F1-optimal cut on elimination scores in `[0, 1]`.
///
/// Every threshold between two adjacent distinct scores gives the same
/// verdicts, so candidates are those intervals; among the optimal ones the
/// widest wins and its midpoint is returned.
pub fn learn_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdChoice, InspectorError> {
    if scores.len() != labels.len() {
        return Err(InspectorError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if !labels.iter().any(|&y| y) || !labels.iter().any(|&y| !y) {
        return Err(InspectorError::SingleClass);
    }
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() == 1 {
        let v = distinct[0];
        return Ok(ThresholdChoice {
            threshold: v,
            f1: f1_of(scores, labels, |s| s > v),
            degenerate: true,
        });
    }
    // Interval [lo, hi) flags exactly the scores >= hi.
    let mut bounds = Vec::with_capacity(distinct.len() + 1);
    // The flag-everything interval needs a lower end strictly below every score.
    bounds.push(if distinct[0] > 0.0 { 0.0 } else { distinct[0] - 1.0 });
    bounds.extend(distinct.iter().copied());
    let last = 1.0f64.max(distinct[distinct.len() - 1]);

    let mut best: Option<(f64, f64, f64)> = None;
    for k in 0..bounds.len() {
        let lo = bounds[k];
        let hi = if k + 1 < bounds.len() { bounds[k + 1] } else { last };
        let f1 = f1_of(scores, labels, |s| s > lo);
        let width = hi - lo;
        let better = match best {
            None => true,
            Some((bf, _, bw)) => f1 > bf || (f1 == bf && width > bw),
        };
        if better {
            best = Some((f1, lo + width / 2.0, width));
        }
    }
    let (f1, threshold, _) = best.expect("at least one interval");
    Ok(ThresholdChoice {
        threshold,
        f1,
        degenerate: false,
    })
}
