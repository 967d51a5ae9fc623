use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AttributionMatrix, ExplainerError, MatchShapley, SqueezeMode};
use crate::features::FEATURE_NAMES;
use crate::trajectory::RawWindow;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickEntry {
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub fired: bool,
    pub eliminated: bool,
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSection {
    pub features: BTreeMap<String, f64>,
    pub shapley: BTreeMap<String, f64>,
    pub baseline: f64,
    pub prediction: f64,
}

/// Explanation of one elimination, joined with its trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub schema_version: u32,
    pub elimination_id: String,
    pub match_id: String,
    pub player_id: String,
    pub elim_tick: i64,
    pub model_version: String,
    pub squeeze: SqueezeMode,
    pub ticks: Vec<TickEntry>,
    #[serde(rename = "match")]
    pub match_section: Option<MatchSection>,
}

/// Joins the window's points (minus the history tick consumed by the
/// features) with the per-tick attributions.
pub fn export_attribution(
    window: &RawWindow,
    attribution: &AttributionMatrix,
    shapley: Option<&MatchShapley>,
) -> Result<ExplanationDoc, ExplainerError> {
    if window.id() != attribution.elimination_id {
        return Err(ExplainerError::IdMismatch(window.id(), attribution.elimination_id.clone()));
    }
    let points = &window.points[1..];
    if points.len() != attribution.values.len() {
        return Err(ExplainerError::ShapeMismatch {
            expected: vec![points.len()],
            got: vec![attribution.values.len()],
        });
    }
    let ticks = points
        .iter()
        .zip(&attribution.values)
        .map(|(p, row)| TickEntry {
            t: p.tick,
            x: p.x,
            y: p.y,
            fired: p.fired,
            eliminated: p.eliminated,
            values: FEATURE_NAMES.iter().map(|n| n.to_string()).zip(row.iter().copied()).collect(),
        })
        .collect();
    let match_section = shapley.map(|s| MatchSection {
        features: s.names.iter().cloned().zip(s.features.iter().copied()).collect(),
        shapley: s.names.iter().cloned().zip(s.values.iter().copied()).collect(),
        baseline: s.baseline,
        prediction: s.prediction,
    });
    Ok(ExplanationDoc {
        schema_version: SCHEMA_VERSION,
        elimination_id: attribution.elimination_id.clone(),
        match_id: window.match_id.clone(),
        player_id: window.player_id.clone(),
        elim_tick: window.elim_tick(),
        model_version: attribution.model_version.clone(),
        squeeze: attribution.squeeze,
        ticks,
        match_section,
    })
}

impl ExplanationDoc {
    /// Attribution values per tick for one feature.
    pub fn feature_track(&self, name: &str) -> Vec<f64> {
        self.ticks.iter().map(|t| t.values.get(name).copied().unwrap_or(0.0)).collect()
    }
}
