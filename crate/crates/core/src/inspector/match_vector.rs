use serde::{Deserialize, Serialize};

use super::InspectorError;

/// Which summaries of the elimination scores feed the match classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum MatchMode {
    /// Statistics of the raw scores.
    #[default]
    #[serde(rename = "o")]
    Original,
    /// Only the fraction of eliminations above the learned threshold.
    #[serde(rename = "b")]
    Binary,
    /// Both.
    #[serde(rename = "a")]
    All,
}

impl std::str::FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "o" | "original" => Ok(MatchMode::Original),
            "b" | "binary" => Ok(MatchMode::Binary),
            "a" | "all" => Ok(MatchMode::All),
            other => Err(format!("unknown match mode {other:?}; expected o, b or a")),
        }
    }
}

impl std::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMode::Original => "o",
            MatchMode::Binary => "b",
            MatchMode::All => "a",
        })
    }
}

impl MatchMode {
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            MatchMode::Original => &["mean", "std", "min", "max", "count"],
            MatchMode::Binary => &["fraction"],
            MatchMode::All => &["mean", "std", "min", "max", "count", "fraction"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchFeatureVector {
    pub mode: MatchMode,
    pub values: Vec<f64>,
}

impl MatchFeatureVector {
    pub fn names(&self) -> &'static [&'static str] {
        self.mode.feature_names()
    }
}

/// Summarizes one player-match's elimination scores. Standard deviation uses
/// the population convention, so a single elimination has std 0.
pub fn match_features(scores: &[f64], mode: MatchMode, threshold: f64) -> Result<MatchFeatureVector, InspectorError> {
    if scores.is_empty() {
        return Err(InspectorError::NoEliminations);
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fraction = scores.iter().filter(|&&s| s > threshold).count() as f64 / n;
    let values = match mode {
        MatchMode::Original => vec![mean, std, min, max, n],
        MatchMode::Binary => vec![fraction],
        MatchMode::All => vec![mean, std, min, max, n, fraction],
    };
    Ok(MatchFeatureVector { mode, values })
}
