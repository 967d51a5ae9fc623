use serde::{Deserialize, Serialize};

use super::dataset::SimulatorError;
use crate::features::{feature_means, FeatureSeries, FEATURE_COUNT, KINEMATIC_CHANNELS};

/// What a per-match mean averages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    /// Raw values. Signed kinematic channels of direction-symmetric motion
    /// average to nearly zero, which makes a relative tolerance vanish.
    #[default]
    Signed,
    /// Absolute values.
    Absolute,
}

impl std::str::FromStr for MeanKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signed" => Ok(MeanKind::Signed),
            "absolute" => Ok(MeanKind::Absolute),
            other => Err(format!("unknown mean kind {other:?}; expected signed or absolute")),
        }
    }
}

/// Per player-match feature means, the unit the adversarial filter works on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchMeans {
    pub match_id: String,
    pub player_id: String,
    pub is_cheater: bool,
    pub means: [f64; FEATURE_COUNT],
    #[serde(default)]
    pub kind: MeanKind,
}

fn means_of<'a>(
    series: impl IntoIterator<Item = &'a FeatureSeries>,
    keep: impl Fn(&FeatureSeries) -> bool,
    kind: MeanKind,
) -> Option<[f64; FEATURE_COUNT]> {
    match kind {
        MeanKind::Signed => feature_means(series, keep).ok(),
        MeanKind::Absolute => {
            let mut sums = [0.0; FEATURE_COUNT];
            let mut count = 0usize;
            for s in series.into_iter().filter(|s| keep(s)) {
                for t in &s.tuples {
                    for (acc, v) in sums.iter_mut().zip(t.to_array()) {
                        *acc += v.abs();
                    }
                    count += 1;
                }
            }
            (count > 0).then(|| sums.map(|s| s / count as f64))
        }
    }
}

/// Groups feature series by (match, player) and averages every tuple.
pub fn match_means(series: &[FeatureSeries], label: impl Fn(&str, &str) -> Option<bool>) -> Vec<MatchMeans> {
    match_means_with(series, label, MeanKind::Signed)
}

/// [`match_means`] with a choice of statistic.
pub fn match_means_with(
    series: &[FeatureSeries],
    label: impl Fn(&str, &str) -> Option<bool>,
    kind: MeanKind,
) -> Vec<MatchMeans> {
    let mut keys: Vec<(&str, &str)> = series.iter().map(|s| (s.match_id.as_str(), s.player_id.as_str())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(m, p)| {
            let is_cheater = label(m, p)?;
            let means = means_of(series, |s| s.match_id == m && s.player_id == p, kind)?;
            Some(MatchMeans {
                match_id: m.to_string(),
                player_id: p.to_string(),
                is_cheater,
                means,
                kind,
            })
        })
        .collect()
}

/// A cheater qualifies if any compared channel lies within `tolerance` of the
/// non-cheater mean, relative to that mean's magnitude.
pub fn within_tolerance(value: f64, reference: f64, tolerance: f64) -> bool {
    (value - reference).abs() <= tolerance * reference.abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSelection {
    pub kind: MeanKind,
    pub reference: [f64; FEATURE_COUNT],
    pub channels: Vec<usize>,
    /// Indices into the cheater rows of the input, in input order.
    pub selected: Vec<usize>,
    /// Which channel matched first for each selected row.
    pub matched_channel: Vec<usize>,
}

/// Cheater player-matches whose behavior falls near the non-cheater average.
///
/// `reference` is the mean over every non-cheater tuple in `series`, of the
/// same kind as the rows' means.
pub fn select_adversarial(
    series: &[FeatureSeries],
    rows: &[MatchMeans],
    channels: &[usize],
    tolerance: f64,
) -> Result<AdversarialSelection, SimulatorError> {
    if !rows.iter().any(|r| r.is_cheater) {
        return Err(SimulatorError::NoCheaters);
    }
    let normal: std::collections::BTreeSet<(&str, &str)> = rows
        .iter()
        .filter(|r| !r.is_cheater)
        .map(|r| (r.match_id.as_str(), r.player_id.as_str()))
        .collect();
    let kind = rows[0].kind;
    let reference = means_of(series, |s| normal.contains(&(s.match_id.as_str(), s.player_id.as_str())), kind)
        .ok_or(SimulatorError::NoNormals)?;
    let mut selected = Vec::new();
    let mut matched_channel = Vec::new();
    for (i, row) in rows.iter().enumerate().filter(|(_, r)| r.is_cheater) {
        if let Some(&c) = channels.iter().find(|&&c| within_tolerance(row.means[c], reference[c], tolerance)) {
            selected.push(i);
            matched_channel.push(c);
        }
    }
    Ok(AdversarialSelection {
        kind,
        reference,
        channels: channels.to_vec(),
        selected,
        matched_channel,
    })
}

/// Channels compared by default: the kinematic ones, whose means vary between players.
pub fn default_channels() -> Vec<usize> {
    KINEMATIC_CHANNELS.to_vec()
}
