//! Two-stage detector: subsequence scoring, per-elimination aggregation and a
//! per-match random forest over summary statistics.

mod bundle;
pub mod forest;
mod match_vector;
mod pipeline;
mod threshold;
pub mod train;
mod window;

pub use bundle::{ModelBundle, NamedArray, NetworkCheckpoint, OptimizerState, TrainingHistories, WindowConfig, FORMAT_VERSION};
pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use match_vector::{match_features, MatchFeatureVector, MatchMode};
pub use pipeline::{
    default_aggregator_layers, default_detector_layers, fit, group_scores, predict_match, prepare, Detector,
    EliminationScore, ExcludedPlayer, FitReport, InspectorConfig, LabeledSeries, MatchPrediction, PlayerVerdict,
};
pub use threshold::{learn_threshold, ThresholdChoice};
pub use train::{train_network, History, SampleSource, TrainingConfig};
pub use window::{slide, slide_matrix, subsequence_count, Normalizer, SubsequenceBatch, DEFAULT_W};

use crate::features::FeatureError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum InspectorError {
    #[error("series of {len} tuples is shorter than the window of {w}")]
    SeriesShorterThanWindow { len: usize, w: usize },
    #[error("training set holds a single class")]
    SingleClassTrainingSet,
    #[error("both classes are required")]
    SingleClass,
    #[error("player has no eliminations")]
    NoEliminations,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
