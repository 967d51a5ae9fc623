//! Classification metrics, threshold baselines and significance tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::features::FeatureSeries;
use crate::ingest::MatchRecord;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("labels and verdicts differ in length: {labels} vs {verdicts}")]
    LengthMismatch { labels: usize, verdicts: usize },
    #[error("match {0} carries no hit column")]
    MissingHitColumn(String),
    #[error("no elimination windows to score")]
    NoWindows,
    #[error("pooled proportion is {0}; the z statistic is undefined")]
    DegeneratePool(f64),
    #[error("group sizes must be at least 1")]
    EmptyGroup,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(labels: &[bool], verdicts: &[bool]) -> Result<Confusion, EvalError> {
    if labels.len() != verdicts.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            verdicts: verdicts.len(),
        });
    }
    let mut c = Confusion::default();
    for (&y, &v) in labels.iter().zip(verdicts) {
        match (y, v) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Ratio with the undefined case reported as 0 and flagged.
fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        num / den
    }
}

fn harmonic(p: f64, r: f64, degenerate: &mut bool) -> f64 {
    ratio(2.0 * p * r, p + r, degenerate)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Positive-class metrics.
    pub plain: Metrics,
    /// Per-class metrics averaged with class support as weight.
    pub weighted: Metrics,
    /// Names of metrics whose denominator was zero.
    pub degenerate: Vec<String>,
}

/// Per-class view of a multi-class confusion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiConfusion {
    /// `counts[truth][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl MultiConfusion {
    pub fn new(classes: usize) -> Self {
        MultiConfusion {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = MultiConfusion::new(classes);
        for (t, p) in pairs {
            m.counts[t][p] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// One-vs-rest counts for class `k`.
    pub fn one_vs_rest(&self, k: usize) -> Confusion {
        let n = self.counts.len();
        let tp = self.counts[k][k];
        let fn_: u64 = (0..n).filter(|&j| j != k).map(|j| self.counts[k][j]).sum();
        let fp: u64 = (0..n).filter(|&i| i != k).map(|i| self.counts[i][k]).sum();
        Confusion {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fn_ - fp,
        }
    }

    pub fn support(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }
}

fn class_metrics(c: &Confusion, flags: &mut BTreeMap<&'static str, bool>) -> Metrics {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let mut d = [false; 5];
    let accuracy = ratio(tp + tn, tp + tn + fp + fn_, &mut d[0]);
    let precision = ratio(tp, tp + fp, &mut d[1]);
    let recall = ratio(tp, tp + fn_, &mut d[2]);
    let f1 = harmonic(precision, recall, &mut d[3]);
    let fpr = ratio(fp, fp + tn, &mut d[4]);
    for (name, hit) in ["accuracy", "precision", "recall", "f1", "fpr"].into_iter().zip(d) {
        *flags.entry(name).or_default() |= hit;
    }
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        fpr,
    }
}

/// Class-weighted metrics over any number of classes.
///
/// Weighted accuracy is the overall accuracy; with support weights it equals
/// weighted recall.
pub fn weighted_metrics(m: &MultiConfusion) -> (Metrics, Vec<String>) {
    let mut flags = BTreeMap::new();
    let n = m.total() as f64;
    let mut w_sum = 0.0;
    let mut acc = Metrics::default();
    for k in 0..m.counts.len() {
        let w = m.support(k) as f64;
        let c = class_metrics(&m.one_vs_rest(k), &mut BTreeMap::new());
        w_sum += w;
        acc.precision += w * c.precision;
        acc.recall += w * c.recall;
        acc.f1 += w * c.f1;
        acc.fpr += w * c.fpr;
    }
    let mut d = false;
    let diag: u64 = (0..m.counts.len()).map(|k| m.counts[k][k]).sum();
    acc.accuracy = ratio(diag as f64, n, &mut d);
    if d {
        flags.insert("weighted_accuracy", true);
    }
    let mut dw = false;
    let inv = ratio(1.0, w_sum, &mut dw);
    if dw {
        flags.insert("weighted", true);
    }
    acc.precision *= inv;
    acc.recall *= inv;
    acc.f1 *= inv;
    acc.fpr *= inv;
    (acc, flags.into_iter().filter(|(_, v)| *v).map(|(k, _)| k.to_string()).collect())
}

/// Binary report: plain metrics for the cheater class plus the weighted average
/// over both classes.
pub fn metrics(c: &Confusion) -> MetricReport {
    let mut flags = BTreeMap::new();
    let plain = class_metrics(c, &mut flags);
    let multi = MultiConfusion {
        counts: vec![vec![c.tn, c.fp], vec![c.fn_, c.tp]],
    };
    let (weighted, wflags) = weighted_metrics(&multi);
    let mut degenerate: Vec<String> = flags.into_iter().filter(|(_, v)| *v).map(|(k, _)| k.to_string()).collect();
    degenerate.extend(wflags);
    MetricReport {
        plain,
        weighted,
        degenerate,
    }
}

/// Verdict of a threshold baseline for one player-match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineVerdict {
    pub match_id: String,
    pub player_id: String,
    pub statistic: f64,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub match_id: String,
    pub player_id: String,
    pub reason: String,
}

/// Per player-match weapon accuracy `hits / shots`.
pub fn hit_accuracy(matches: &[MatchRecord]) -> Result<(Vec<BaselineVerdict>, Vec<Skipped>), EvalError> {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for m in matches {
        if !m.players.iter().any(|p| p.has_hit_column()) {
            return Err(EvalError::MissingHitColumn(m.match_id.clone()));
        }
        for p in &m.players {
            let shots = p.ticks.iter().filter(|t| t.fired).count();
            if shots == 0 {
                skipped.push(Skipped {
                    match_id: m.match_id.clone(),
                    player_id: p.player_id.clone(),
                    reason: "no shots fired".into(),
                });
                continue;
            }
            let hits = p.ticks.iter().filter(|t| t.fired && t.hit == Some(true)).count();
            out.push(BaselineVerdict {
                match_id: m.match_id.clone(),
                player_id: p.player_id.clone(),
                statistic: hits as f64 / shots as f64,
                verdict: false,
            });
        }
    }
    Ok((out, skipped))
}

/// Flags players whose weapon accuracy exceeds `threshold`.
pub fn th_hit_acc(matches: &[MatchRecord], threshold: f64) -> Result<(Vec<BaselineVerdict>, Vec<Skipped>), EvalError> {
    let (mut v, skipped) = hit_accuracy(matches)?;
    apply_threshold(&mut v, threshold);
    Ok((v, skipped))
}

/// Per-player summary of the acceleration magnitudes of all its windows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelStatistic {
    #[default]
    Max,
    /// Nearest-rank percentile in `(0, 100]`.
    Percentile(f64),
}

/// Per player-match maximum acceleration magnitude over all windows.
pub fn max_acceleration(series: &[FeatureSeries]) -> Result<Vec<BaselineVerdict>, EvalError> {
    acceleration_statistic(series, AccelStatistic::Max)
}

pub fn acceleration_statistic(series: &[FeatureSeries], stat: AccelStatistic) -> Result<Vec<BaselineVerdict>, EvalError> {
    if series.is_empty() {
        return Err(EvalError::NoWindows);
    }
    let mut pooled: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for s in series {
        pooled
            .entry((s.match_id.clone(), s.player_id.clone()))
            .or_default()
            .extend(s.tuples.iter().map(|t| t.accel_magnitude()));
    }
    Ok(pooled
        .into_iter()
        .map(|((match_id, player_id), mut values)| {
            let statistic = match stat {
                AccelStatistic::Max => values.iter().copied().fold(0.0, f64::max),
                AccelStatistic::Percentile(q) => {
                    values.sort_by(f64::total_cmp);
                    let rank = ((q.clamp(0.0, 100.0) / 100.0) * values.len() as f64).ceil() as usize;
                    values[rank.clamp(1, values.len()) - 1]
                }
            };
            BaselineVerdict {
                match_id,
                player_id,
                statistic,
                verdict: false,
            }
        })
        .collect())
}

/// Flags players whose peak aim acceleration exceeds `threshold`.
pub fn th_acc_a(series: &[FeatureSeries], threshold: f64) -> Result<Vec<BaselineVerdict>, EvalError> {
    let mut v = max_acceleration(series)?;
    apply_threshold(&mut v, threshold);
    Ok(v)
}

pub fn apply_threshold(verdicts: &mut [BaselineVerdict], threshold: f64) {
    for v in verdicts {
        v.verdict = v.statistic > threshold;
    }
}

/// One point of a threshold sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub confusion: Confusion,
    pub f1: f64,
}

/// Evaluates every distinct cut of `scores`: below the minimum, and at each
/// distinct value (`score > cut` flags).
pub fn threshold_sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<SweepPoint>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            verdicts: scores.len(),
        });
    }
    let mut cuts: Vec<f64> = scores.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let lowest = cuts.first().map(|v| v - 1.0).unwrap_or(0.0);
    cuts.insert(0, lowest);
    let mut out = Vec::with_capacity(cuts.len());
    for cut in cuts {
        let verdicts: Vec<bool> = scores.iter().map(|&s| s > cut).collect();
        let c = confusion(labels, &verdicts)?;
        out.push(SweepPoint {
            threshold: cut,
            confusion: c,
            f1: metrics(&c).plain.f1,
        });
    }
    Ok(out)
}

/// The sweep point with the highest cheater-class F1; earliest cut on ties.
pub fn best_threshold(scores: &[f64], labels: &[bool]) -> Result<SweepPoint, EvalError> {
    let sweep = threshold_sweep(scores, labels)?;
    Ok(sweep
        .into_iter()
        .fold(None::<SweepPoint>, |best, p| match best {
            Some(b) if b.f1 >= p.f1 => Some(b),
            _ => Some(p),
        })
        .expect("sweep has at least one point"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
}

/// Pooled two-proportion z-test, two-sided, without continuity correction.
pub fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<ZTest, EvalError> {
    two_proportion_z_with(x1, n1, x2, n2, false)
}

/// As [`two_proportion_z`]; `continuity` shrinks the difference in
/// proportions by `(1/n1 + 1/n2) / 2` toward zero.
pub fn two_proportion_z_with(x1: u64, n1: u64, x2: u64, n2: u64, continuity: bool) -> Result<ZTest, EvalError> {
    if n1 == 0 || n2 == 0 {
        return Err(EvalError::EmptyGroup);
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(EvalError::DegeneratePool(pooled));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let mut diff = x1 as f64 / n1f - x2 as f64 / n2f;
    if continuity {
        diff = diff.signum() * (diff.abs() - 0.5 * (1.0 / n1f + 1.0 / n2f)).max(0.0);
    }
    let z = diff / se;
    let normal = Normal::standard();
    let p_value = (2.0 * normal.sf(z.abs())).min(1.0);
    Ok(ZTest { z, p_value })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`.
///
/// Sums the probability of every table with the same margins that is no more
/// likely than the observed one.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = table;
    let row1 = a + b;
    let col1 = a + c;
    let n = a + b + c + d;
    if n == 0 {
        return 1.0;
    }
    let lo = col1.saturating_sub(n - row1);
    let hi = row1.min(col1);
    let ln_p = |x: u64| ln_choose(col1, x) + ln_choose(n - col1, row1 - x) - ln_choose(n, row1);
    let observed = ln_p(a);
    // Relative slack so tables equal in probability up to rounding count as extreme.
    let cutoff = observed + 1e-7;
    let p: f64 = (lo..=hi).map(ln_p).filter(|&l| l <= cutoff).map(f64::exp).sum();
    p.min(1.0)
}
