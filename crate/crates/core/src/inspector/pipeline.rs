use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::{ModelBundle, NamedArray, NetworkCheckpoint, TrainingHistories, WindowConfig, FORMAT_VERSION};
use super::forest::{fit_forest, ForestConfig};
use super::match_vector::{match_features, MatchFeatureVector, MatchMode};
use super::threshold::learn_threshold;
use super::train::{train_network, SampleSource, TrainingConfig};
use super::window::{slide_matrix, Normalizer};
use super::InspectorError;
use crate::features::{compute_features, FeatureSeries, FEATURE_COUNT};
use crate::ingest::MatchRecord;
use crate::nn::{LayerConfig, Network, NetworkConfig, Tensor};
use crate::seeds::stream_seed;
use crate::trajectory::{extract_windows, CleansingReport, RawWindow, Screen};

pub fn default_detector_layers(hidden: usize, filters: usize, dense: usize) -> Vec<LayerConfig> {
    vec![
        LayerConfig::Gru { hidden },
        LayerConfig::Conv1d { filters, kernel: 3 },
        LayerConfig::GlobalMaxPool,
        LayerConfig::Dense { units: dense },
        LayerConfig::Tanh,
        LayerConfig::Dense { units: 1 },
        LayerConfig::Sigmoid,
    ]
}

pub fn default_aggregator_layers() -> Vec<LayerConfig> {
    vec![
        LayerConfig::Dense { units: 32 },
        LayerConfig::Relu,
        LayerConfig::Dropout { rate: 0.3 },
        LayerConfig::Dense { units: 16 },
        LayerConfig::Relu,
        LayerConfig::Dense { units: 1 },
        LayerConfig::Sigmoid,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InspectorConfig {
    pub window: WindowConfig,
    pub mode: MatchMode,
    pub detector_layers: Vec<LayerConfig>,
    pub aggregator_layers: Vec<LayerConfig>,
    pub detector_training: TrainingConfig,
    pub aggregator_training: TrainingConfig,
    pub forest: ForestConfig,
    pub verdict_cut: f64,
    pub background_size: usize,
    pub seed: u64,
}

impl Default for InspectorConfig {
    fn default() -> Self {
        InspectorConfig {
            window: WindowConfig::default(),
            mode: MatchMode::Original,
            detector_layers: default_detector_layers(32, 32, 16),
            aggregator_layers: default_aggregator_layers(),
            detector_training: TrainingConfig::default(),
            aggregator_training: TrainingConfig::default(),
            forest: ForestConfig::default(),
            verdict_cut: 0.5,
            background_size: 64,
            seed: 0,
        }
    }
}

impl InspectorConfig {
    pub fn validate(&self) -> Result<(), InspectorError> {
        let bad = |m: String| Err(InspectorError::InvalidConfig(m));
        let WindowConfig { m, n, w } = self.window;
        if m == 0 || n == 0 || w == 0 || w > m + n {
            return bad(format!("window m={m}, n={n}, w={w} is not usable"));
        }
        for (name, t) in [("detector", &self.detector_training), ("aggregator", &self.aggregator_training)] {
            if t.epochs == 0 || t.batch_size == 0 || !(t.lr > 0.0) || !(t.plateau_factor > 0.0 && t.plateau_factor < 1.0) {
                return bad(format!("{name} training config out of range"));
            }
        }
        if self.forest.n_trees == 0 || self.forest.max_depth == 0 {
            return bad("forest needs at least one tree of depth 1".into());
        }
        if !(0.0..=1.0).contains(&self.verdict_cut) {
            return bad("verdict_cut must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Features of one accepted elimination window, with its player label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    pub series: FeatureSeries,
    pub window: RawWindow,
    pub label: Option<bool>,
}

/// Extracts windows and features for every player of every match.
pub fn prepare(matches: &[MatchRecord], window: WindowConfig) -> (Vec<LabeledSeries>, CleansingReport) {
    let mut report = CleansingReport::default();
    let mut out = Vec::new();
    for m in matches {
        for p in &m.players {
            let (windows, r) = extract_windows(p, &m.match_id, window.m, window.n, Screen::default());
            report.merge(&r);
            for w in windows {
                let series = compute_features(&w).expect("accepted windows have m + n + 1 consecutive ticks");
                out.push(LabeledSeries {
                    series,
                    window: w,
                    label: m.label(&p.player_id),
                });
            }
        }
    }
    (out, report)
}

struct Subsequences<'a> {
    matrices: &'a [Tensor],
    labels: &'a [f64],
    index: Vec<(u32, u32)>,
    w: usize,
}

impl<'a> Subsequences<'a> {
    fn new(matrices: &'a [Tensor], labels: &'a [f64], w: usize) -> Self {
        let mut index = Vec::new();
        for (e, m) in matrices.iter().enumerate() {
            for o in 0..=(m.rows() - w) {
                index.push((e as u32, o as u32));
            }
        }
        Subsequences {
            matrices,
            labels,
            index,
            w,
        }
    }
}

impl SampleSource for Subsequences<'_> {
    fn len(&self) -> usize {
        self.index.len()
    }
    fn input(&self, i: usize) -> Tensor {
        let (e, o) = self.index[i];
        let m = &self.matrices[e as usize];
        let f = m.cols();
        let o = o as usize;
        Tensor {
            shape: vec![self.w, f],
            data: m.data[o * f..(o + self.w) * f].to_vec(),
        }
    }
    fn label(&self, i: usize) -> f64 {
        self.labels[self.index[i].0 as usize]
    }
}

/// Scores of one elimination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationScore {
    pub elimination_id: String,
    pub match_id: String,
    pub player_id: String,
    pub elim_tick: i64,
    pub per_subseq: Vec<f64>,
    pub aggregated: f64,
}

/// The trained networks, ready for inference.
#[derive(Clone, Debug)]
pub struct Detector {
    pub window: WindowConfig,
    pub normalizer: Normalizer,
    pub detector: Network,
    pub aggregator: Network,
}

impl Detector {
    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self, InspectorError> {
        Ok(Detector {
            window: bundle.window,
            normalizer: bundle.normalization.clone(),
            detector: bundle.detector.restore()?,
            aggregator: bundle.aggregator.restore()?,
        })
    }

    /// Per-subsequence probabilities for a normalized `L x F` matrix.
    pub fn score_subsequences(&self, matrix: &Tensor) -> Result<Vec<f64>, InspectorError> {
        let batch = slide_matrix(matrix, self.window.w, 1)?;
        batch
            .windows
            .iter()
            .map(|x| self.detector.predict(x).map_err(InspectorError::from))
            .collect()
    }

    /// Elimination probability from the per-subsequence probabilities.
    pub fn aggregate(&self, per_subseq: &[f64]) -> Result<f64, InspectorError> {
        let expected = self.aggregator.input_shape().1;
        if per_subseq.len() != expected {
            return Err(InspectorError::LengthMismatch {
                expected,
                got: per_subseq.len(),
            });
        }
        Ok(self.aggregator.predict(&Tensor::row(per_subseq.to_vec()))?)
    }

    pub fn score(&self, series: &FeatureSeries) -> Result<EliminationScore, InspectorError> {
        if series.len() != self.window.len() {
            return Err(InspectorError::LengthMismatch {
                expected: self.window.len(),
                got: series.len(),
            });
        }
        let per_subseq = self.score_subsequences(&self.normalizer.transform(series))?;
        let aggregated = self.aggregate(&per_subseq)?;
        Ok(EliminationScore {
            elimination_id: series.id(),
            match_id: series.match_id.clone(),
            player_id: series.player_id.clone(),
            elim_tick: series.elim_tick,
            per_subseq,
            aggregated,
        })
    }
}

/// Groups elimination scores by (match, player), keeping elimination order.
pub fn group_scores(scores: &[EliminationScore]) -> BTreeMap<(String, String), Vec<&EliminationScore>> {
    let mut g: BTreeMap<(String, String), Vec<&EliminationScore>> = BTreeMap::new();
    for s in scores {
        g.entry((s.match_id.clone(), s.player_id.clone())).or_default().push(s);
    }
    for v in g.values_mut() {
        v.sort_by_key(|s| s.elim_tick);
    }
    g
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_eliminations: usize,
    pub val_eliminations: usize,
    pub train_cleansing: CleansingReport,
    pub val_cleansing: CleansingReport,
    pub threshold_f1: f64,
    pub forest_rows: usize,
}

fn labeled(series: Vec<LabeledSeries>) -> Vec<(FeatureSeries, bool)> {
    series
        .into_iter()
        .filter_map(|l| l.label.map(|y| (l.series, y)))
        .collect()
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Trains detector, aggregator, threshold and forest.
pub fn fit(
    train: &[MatchRecord],
    val: &[MatchRecord],
    config: &InspectorConfig,
) -> Result<(ModelBundle, FitReport), InspectorError> {
    config.validate()?;
    let window = config.window;
    let (train_series, train_cleansing) = prepare(train, window);
    let (val_series, val_cleansing) = prepare(val, window);
    let train_series = labeled(train_series);
    let val_series = labeled(val_series);
    if train_series.is_empty() {
        return Err(InspectorError::NoEliminations);
    }

    let normalizer = Normalizer::fit(train_series.iter().map(|(s, _)| s), window.len());
    let train_m: Vec<Tensor> = train_series.iter().map(|(s, _)| normalizer.transform(s)).collect();
    let val_m: Vec<Tensor> = val_series.iter().map(|(s, _)| normalizer.transform(s)).collect();
    let train_y: Vec<f64> = train_series.iter().map(|(_, y)| f64::from(u8::from(*y))).collect();
    let val_y: Vec<f64> = val_series.iter().map(|(_, y)| f64::from(u8::from(*y))).collect();

    // Stage 1: subsequence detector on weak labels.
    let mut init_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &[10]));
    let mut detector = Network::build(NetworkConfig {
        input_steps: window.w,
        input_channels: FEATURE_COUNT,
        layers: config.detector_layers.clone(),
    })?;
    detector.init(&mut init_rng);
    let train_sub = Subsequences::new(&train_m, &train_y, window.w);
    let val_sub = Subsequences::new(&val_m, &val_y, window.w);
    let det_cfg = TrainingConfig {
        seed: stream_seed(config.seed, &[11, config.detector_training.seed]),
        ..config.detector_training.clone()
    };
    let (det_hist, det_adam) = train_network(&mut detector, &train_sub, &val_sub, &det_cfg)?;

    // Stage 2: aggregator over the full per-subsequence score vectors.
    let mut stage = Detector {
        window,
        normalizer: normalizer.clone(),
        detector,
        aggregator: Network::build(NetworkConfig {
            input_steps: 1,
            input_channels: window.subsequences(),
            layers: config.aggregator_layers.clone(),
        })?,
    };
    stage.aggregator.init(&mut init_rng);
    let score_all = |ms: &[Tensor], det: &Detector| -> Result<Vec<Vec<f64>>, InspectorError> {
        ms.par_iter().map(|m| det.score_subsequences(m)).collect()
    };
    let train_vecs = score_all(&train_m, &stage)?;
    let val_vecs = score_all(&val_m, &stage)?;
    let to_samples = |vecs: &[Vec<f64>], ys: &[f64]| -> Vec<(Tensor, f64)> {
        vecs.iter().zip(ys).map(|(v, &y)| (Tensor::row(v.clone()), y)).collect()
    };
    let agg_train = to_samples(&train_vecs, &train_y);
    let agg_val = to_samples(&val_vecs, &val_y);
    let agg_cfg = TrainingConfig {
        seed: stream_seed(config.seed, &[12, config.aggregator_training.seed]),
        ..config.aggregator_training.clone()
    };
    let (agg_hist, agg_adam) = train_network(&mut stage.aggregator, &agg_train, &agg_val, &agg_cfg)?;

    // Stage 3: elimination threshold and match-level forest on train + val.
    let mut elim_scores = Vec::with_capacity(train_series.len() + val_series.len());
    for ((s, _), v) in train_series.iter().chain(&val_series).zip(train_vecs.iter().chain(&val_vecs)) {
        elim_scores.push(EliminationScore {
            elimination_id: s.id(),
            match_id: s.match_id.clone(),
            player_id: s.player_id.clone(),
            elim_tick: s.elim_tick,
            per_subseq: v.clone(),
            aggregated: stage.aggregate(v)?,
        });
    }
    let elim_labels: Vec<bool> = train_series.iter().chain(&val_series).map(|(_, y)| *y).collect();
    let agg: Vec<f64> = elim_scores.iter().map(|e| e.aggregated).collect();
    let threshold = learn_threshold(&agg, &elim_labels)?;

    let mut player_label: BTreeMap<(String, String), bool> = BTreeMap::new();
    for (s, y) in train_series.iter().chain(&val_series) {
        player_label.insert((s.match_id.clone(), s.player_id.clone()), *y);
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (key, group) in group_scores(&elim_scores) {
        let scores: Vec<f64> = group.iter().map(|e| e.aggregated).collect();
        rows.push(match_features(&scores, config.mode, threshold.threshold)?.values);
        labels.push(player_label[&key]);
    }
    let forest_cfg = ForestConfig {
        seed: stream_seed(config.seed, &[13, config.forest.seed]),
        ..config.forest.clone()
    };
    let forest = fit_forest(&rows, &labels, &forest_cfg)?;

    // Explanation background: a seeded sample of training subsequences.
    let mut bg_idx: Vec<usize> = (0..train_sub.len()).collect();
    bg_idx.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &[14])));
    bg_idx.truncate(config.background_size.min(bg_idx.len()));
    bg_idx.sort_unstable();
    let background = bg_idx
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let t = train_sub.input(i);
            NamedArray {
                name: format!("bg{k}"),
                shape: t.shape,
                data: t.data,
            }
        })
        .collect();

    let report = FitReport {
        train_eliminations: train_series.len(),
        val_eliminations: val_series.len(),
        train_cleansing,
        val_cleansing,
        threshold_f1: threshold.f1,
        forest_rows: rows.len(),
    };
    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        window,
        mode: config.mode,
        normalization: normalizer,
        detector: NetworkCheckpoint::capture(&stage.detector, Some(&det_adam)),
        aggregator: NetworkCheckpoint::capture(&stage.aggregator, Some(&agg_adam)),
        best_threshold: threshold.threshold,
        threshold_degenerate: threshold.degenerate,
        forest,
        verdict_cut: config.verdict_cut,
        background,
        match_background: column_means(&rows),
        history: TrainingHistories {
            detector: det_hist,
            aggregator: agg_hist,
        },
    };
    Ok((bundle, report))
}

/// Verdict for one player in one match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerVerdict {
    pub match_id: String,
    pub player_id: String,
    pub verdict: bool,
    pub probability: f64,
    pub elimination_scores: Vec<f64>,
    pub elimination_ticks: Vec<i64>,
    pub threshold: f64,
    pub features: MatchFeatureVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPlayer {
    pub match_id: String,
    pub player_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchPrediction {
    pub players: Vec<PlayerVerdict>,
    pub excluded: Vec<ExcludedPlayer>,
    pub eliminations: Vec<EliminationScore>,
}

/// Full pipeline for one match. A failing player is reported and skipped.
pub fn predict_match(bundle: &ModelBundle, detector: &Detector, record: &MatchRecord) -> MatchPrediction {
    let results: Vec<Result<(PlayerVerdict, Vec<EliminationScore>), ExcludedPlayer>> = record
        .players
        .par_iter()
        .map(|p| {
            let exclude = |reason: String| ExcludedPlayer {
                match_id: record.match_id.clone(),
                player_id: p.player_id.clone(),
                reason,
            };
            let (windows, report) =
                extract_windows(p, &record.match_id, bundle.window.m, bundle.window.n, Screen::default());
            if report.no_elimination_player {
                return Err(exclude("no eliminations".into()));
            }
            if windows.is_empty() {
                return Err(exclude(format!(
                    "all {} eliminations rejected by cleansing",
                    report.eliminations
                )));
            }
            let mut scores = Vec::with_capacity(windows.len());
            for w in &windows {
                let s = compute_features(w)
                    .map_err(InspectorError::from)
                    .and_then(|f| detector.score(&f))
                    .map_err(|e| exclude(e.to_string()))?;
                scores.push(s);
            }
            let agg: Vec<f64> = scores.iter().map(|s| s.aggregated).collect();
            let features =
                match_features(&agg, bundle.mode, bundle.best_threshold).map_err(|e| exclude(e.to_string()))?;
            let (probability, verdict) = bundle.forest.predict(&features.values, bundle.verdict_cut);
            Ok((
                PlayerVerdict {
                    match_id: record.match_id.clone(),
                    player_id: p.player_id.clone(),
                    verdict,
                    probability,
                    elimination_scores: agg,
                    elimination_ticks: scores.iter().map(|s| s.elim_tick).collect(),
                    threshold: bundle.best_threshold,
                    features,
                },
                scores,
            ))
        })
        .collect();
    let mut out = MatchPrediction::default();
    for r in results {
        match r {
            Ok((v, s)) => {
                out.players.push(v);
                out.eliminations.extend(s);
            }
            Err(e) => out.excluded.push(e),
        }
    }
    out
}
