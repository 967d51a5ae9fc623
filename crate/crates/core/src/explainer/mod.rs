//! Per-tick attributions for the subsequence model and exact Shapley values
//! for the match classifier.

mod document;
mod gradients;
mod shapley;
mod squeeze;

pub use document::{export_attribution, ExplanationDoc, MatchSection, TickEntry, SCHEMA_VERSION};
pub use gradients::{expected_gradients, Differentiable, Sampling};
pub use shapley::{exact_shapley, MatchShapley, MAX_EXACT_FEATURES};
pub use squeeze::{coverage, denominator, temporal_squeeze, SqueezeMode};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureSeries, FEATURE_COUNT};
use crate::inspector::{Detector, ModelBundle};
use crate::nn::{NnError, Tensor};
use crate::seeds::{id_seed, stream_seed};

#[derive(Debug, thiserror::Error)]
pub enum ExplainerError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("{0} features is too many for exact enumeration")]
    TooManyFeatures(usize),
    #[error("ids disagree: {0} vs {1}")]
    IdMismatch(String, String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Inspector(#[from] crate::inspector::InspectorError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub n_samples: usize,
    pub sampling: Sampling,
    pub squeeze: SqueezeMode,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            n_samples: 200,
            sampling: Sampling::Stratified,
            squeeze: SqueezeMode::Verbatim,
            seed: 0,
        }
    }
}

/// Per-tick, per-feature attribution for one elimination window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub elimination_id: String,
    pub model_version: String,
    pub squeeze: SqueezeMode,
    pub w: usize,
    /// One row per tick of the window, one column per feature.
    pub values: Vec<Vec<f64>>,
}

impl AttributionMatrix {
    pub fn from_tensor(elimination_id: String, model_version: String, squeeze: SqueezeMode, w: usize, t: &Tensor) -> Self {
        AttributionMatrix {
            elimination_id,
            model_version,
            squeeze,
            w,
            values: (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect(),
        }
    }
}

pub fn background_tensors(bundle: &ModelBundle) -> Vec<Tensor> {
    bundle
        .background
        .iter()
        .map(|a| Tensor {
            shape: a.shape.clone(),
            data: a.data.clone(),
        })
        .collect()
}

/// Raw per-subsequence attributions (`w x F` each) of one elimination.
pub fn subsequence_attributions(
    detector: &Detector,
    series: &FeatureSeries,
    background: &[Tensor],
    config: &ExplainConfig,
) -> Result<Vec<Tensor>, ExplainerError> {
    let matrix = detector.normalizer.transform(series);
    let batch = crate::inspector::slide_matrix(&matrix, detector.window.w, 1)?;
    let root = id_seed(config.seed, &series.id());
    batch
        .windows
        .par_iter()
        .enumerate()
        .map(|(s, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(root, &[s as u64]));
            expected_gradients(&detector.detector, x, background, config.n_samples, config.sampling, &mut rng)
        })
        .collect()
}

/// Expected-gradients attributions of every subsequence score, squeezed into
/// one value per tick and feature.
pub fn explain_elimination(
    detector: &Detector,
    model_version: &str,
    series: &FeatureSeries,
    background: &[Tensor],
    config: &ExplainConfig,
) -> Result<AttributionMatrix, ExplainerError> {
    let shap = subsequence_attributions(detector, series, background, config)?;
    let squeezed = temporal_squeeze(&shap, series.len(), detector.window.w, config.squeeze)?;
    debug_assert_eq!(squeezed.cols(), FEATURE_COUNT);
    Ok(AttributionMatrix::from_tensor(
        series.id(),
        model_version.to_string(),
        config.squeeze,
        detector.window.w,
        &squeezed,
    ))
}

/// Shapley values of the forest probability for one match vector, against
/// a background vector.
pub fn explain_match(bundle: &ModelBundle, features: &[f64], background: &[f64]) -> Result<MatchShapley, ExplainerError> {
    exact_shapley(
        |v| bundle.forest.predict_proba(v),
        features,
        background,
        bundle.mode.feature_names(),
    )
}
