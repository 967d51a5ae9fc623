//! Subcommand implementations. Each validates its effective config, does its
//! work, then writes a manifest next to its outputs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use aimguard_core::eval::{
    acceleration_statistic, best_threshold, confusion, fisher_exact, hit_accuracy, metrics, two_proportion_z_with,
    AccelStatistic, BaselineVerdict, Confusion, MetricReport,
};
use aimguard_core::explainer::{
    background_tensors, explain_elimination, explain_match, export_attribution, ExplainConfig, Sampling, SqueezeMode,
};
use aimguard_core::features::{compute_features, write_feature_dump};
use aimguard_core::inspector::{
    default_detector_layers, fit, predict_match, prepare, Detector, InspectorConfig, MatchMode, ModelBundle,
    PlayerVerdict, TrainingConfig, WindowConfig,
};
use aimguard_core::simulator::{gen_dataset, write_dataset, DatasetConfig, ProfileMix, TickRange, LABELS_FILE, TICKS_FILE, TRUTH_FILE};
use aimguard_core::trajectory::{extract_windows, Screen, DEFAULT_M, DEFAULT_N};
use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_matches, read_labels, sanitize};
use crate::manifest::{dir_manifest, file_manifest, Run};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20)]
    pub matches: usize,
    #[arg(long, default_value_t = 10)]
    pub players: usize,
    #[arg(long, default_value_t = 0.10)]
    pub cheater_frac: f64,
    /// `blatant`, `mimic`, or weights such as `aimbot=0.5,hybrid=0.5`.
    #[arg(long, default_value = "blatant")]
    pub profile_mix: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of the first match id, so splits can share one namespace.
    #[arg(long, default_value_t = 0)]
    pub first_match: usize,
    #[arg(long, default_value_t = 2)]
    pub min_eliminations: u32,
    #[arg(long, default_value_t = 4)]
    pub max_eliminations: u32,
    /// Overrides the smoothing of aimbot profiles, in [0, 1].
    #[arg(long)]
    pub smoothing: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn parse_profile_mix(s: &str) -> Result<ProfileMix> {
    match s {
        "blatant" => return Ok(ProfileMix::blatant()),
        "mimic" => return Ok(ProfileMix::mimic_only()),
        _ => {}
    }
    let mut mix = ProfileMix {
        aimbot: 0.0,
        wallhack: 0.0,
        hybrid: 0.0,
        mimic: 0.0,
    };
    for part in s.split(',') {
        let (name, weight) = part
            .split_once('=')
            .with_context(|| format!("profile mix entry {part:?} is not name=weight"))?;
        let weight: f64 = weight.trim().parse().with_context(|| format!("bad weight in {part:?}"))?;
        ensure!(weight.is_finite() && weight >= 0.0, "weight in {part:?} must be non-negative");
        let slot = match name.trim() {
            "aimbot" => &mut mix.aimbot,
            "wallhack" => &mut mix.wallhack,
            "hybrid" => &mut mix.hybrid,
            "mimic" => &mut mix.mimic,
            other => bail!("unknown profile {other:?}; expected aimbot, wallhack, hybrid or mimic"),
        };
        *slot = weight;
    }
    Ok(mix)
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let config = DatasetConfig {
        matches: args.matches,
        players: args.players,
        cheater_frac: args.cheater_frac,
        profile_mix: parse_profile_mix(&args.profile_mix)?,
        eliminations: TickRange::new(args.min_eliminations, args.max_eliminations),
        seed: args.seed,
        first_match: args.first_match,
        smoothing_override: args.smoothing,
    };
    let mut run = Run::start("simulate", &args)?;
    if let Some(c) = &args.config {
        run.input(c);
    }
    let dataset = gen_dataset(&config).context("simulate")?;
    write_dataset(&dataset, &args.out).context("simulate: writing dataset")?;
    for name in [TICKS_FILE, LABELS_FILE, TRUTH_FILE] {
        run.output(args.out.join(name));
    }
    run.notes = serde_json::json!({ "dataset": config, "players": dataset.labels.len() });
    run.finish(&dir_manifest(&args.out))?;
    Ok(())
}

// ---------------------------------------------------------------- extract

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ExtractArgs {
    /// Tick log, or a dataset directory holding one.
    #[arg(long)]
    pub ticks: PathBuf,
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub const FEATURES_FILE: &str = "features.csv";
pub const CLEANSING_FILE: &str = "cleansing.json";

pub fn extract(args: ExtractArgs) -> Result<()> {
    ensure!(args.m > 0 && args.n > 0, "extract: m and n must be positive");
    let mut run = Run::start("extract", &args)?;
    let loaded = load_matches(&args.ticks, None).context("extract")?;
    loaded.files.iter().for_each(|f| run.input(f));
    let per_player: Vec<_> = loaded
        .matches
        .par_iter()
        .flat_map_iter(|m| {
            m.players.iter().map(move |p| {
                let (windows, report) = extract_windows(p, &m.match_id, args.m, args.n, Screen::default());
                let series: Vec<_> = windows.iter().filter_map(|w| compute_features(w).ok()).collect();
                (m.match_id.clone(), p.player_id.clone(), series, report)
            })
        })
        .collect();
    let mut series = Vec::new();
    let mut total = aimguard_core::trajectory::CleansingReport::default();
    let mut players = Vec::new();
    for (match_id, player_id, s, report) in per_player {
        total.merge(&report);
        series.extend(s);
        players.push(serde_json::json!({ "match_id": match_id, "player_id": player_id, "report": report }));
    }
    create_dir(&args.out)?;
    let features = args.out.join(FEATURES_FILE);
    let mut buf = Vec::new();
    write_feature_dump(&series, &mut buf).context("extract: writing features")?;
    write_file(&features, &buf)?;
    let cleansing = args.out.join(CLEANSING_FILE);
    write_file(
        &cleansing,
        &serde_json::to_vec_pretty(&serde_json::json!({ "total": total, "players": players }))?,
    )?;
    run.output(features);
    run.output(cleansing);
    run.notes = serde_json::json!({ "windows": series.len() });
    run.finish(&dir_manifest(&args.out))?;
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Training tick log or dataset directory.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// Evaluated after training when given.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Ticks before the elimination [default: 64].
    #[arg(long)]
    pub m: Option<usize>,
    /// Ticks after the elimination [default: 32].
    #[arg(long)]
    pub n: Option<usize>,
    /// Subsequence length [default: 6].
    #[arg(long)]
    pub w: Option<usize>,
    /// Match classifier input: o (score statistics), b (fraction above the
    /// threshold) or a (both) [default: o].
    #[arg(long)]
    pub mode: Option<MatchMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Detector epochs [default: 12].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Training subsequences visited per detector epoch [default: 20000].
    #[arg(long)]
    pub samples_per_epoch: Option<usize>,
    /// Full inspector configuration; the flags above override its fields.
    #[arg(skip)]
    pub inspector: Option<InspectorConfig>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Training budget sized for a few CPU minutes on the default architecture.
pub fn default_inspector() -> InspectorConfig {
    InspectorConfig {
        detector_layers: default_detector_layers(32, 32, 16),
        detector_training: TrainingConfig {
            epochs: 12,
            samples_per_epoch: Some(20_000),
            max_val_samples: Some(4_000),
            ..TrainingConfig::default()
        },
        aggregator_training: TrainingConfig {
            epochs: 80,
            batch_size: 64,
            ..TrainingConfig::default()
        },
        ..InspectorConfig::default()
    }
}

impl TrainArgs {
    pub fn inspector_config(&self) -> InspectorConfig {
        let mut c = self.inspector.clone().unwrap_or_else(default_inspector);
        c.window = WindowConfig {
            m: self.m.unwrap_or(c.window.m),
            n: self.n.unwrap_or(c.window.n),
            w: self.w.unwrap_or(c.window.w),
        };
        if let Some(mode) = self.mode {
            c.mode = mode;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(e) = self.epochs {
            c.detector_training.epochs = e;
        }
        if let Some(s) = self.samples_per_epoch {
            c.detector_training.samples_per_epoch = Some(s);
        }
        c
    }
}

pub const MODEL_FILE: &str = "model.json";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const TEST_VERDICTS_FILE: &str = "test_verdicts.jsonl";
pub const TEST_REPORT_FILE: &str = "test_report.json";

pub fn train(args: TrainArgs) -> Result<()> {
    let config = args.inspector_config();
    config.validate().context("train: invalid configuration")?;
    let mut run = Run::start("train", &serde_json::json!({ "args": &args, "inspector": &config }))?;
    let train = load_matches(&args.train, None).context("train: training set")?;
    let val = load_matches(&args.val, None).context("train: validation set")?;
    let test = args
        .test
        .as_deref()
        .map(|p| load_matches(p, None).context("train: test set"))
        .transpose()?;
    for l in [Some(&train), Some(&val), test.as_ref()].into_iter().flatten() {
        l.files.iter().for_each(|f| run.input(f));
    }
    let (bundle, report) = fit(&train.matches, &val.matches, &config).context("train")?;
    create_dir(&args.out)?;
    let model = args.out.join(MODEL_FILE);
    write_file(&model, bundle.to_json()?.as_bytes())?;
    run.output(&model);
    let fit_report = args.out.join(FIT_REPORT_FILE);
    write_file(&fit_report, &serde_json::to_vec_pretty(&report)?)?;
    run.output(&fit_report);
    if let Some(test) = test {
        let detector = Detector::from_bundle(&bundle)?;
        let (verdicts, excluded) = predict_all(&bundle, &detector, &test.matches);
        let path = args.out.join(TEST_VERDICTS_FILE);
        write_file(&path, &jsonl(&verdicts)?)?;
        run.output(&path);
        let labels = test.matches.iter().flat_map(|m| {
            m.label_map.iter().map(move |(p, &y)| ((m.match_id.clone(), p.clone()), y))
        });
        let report = evaluate(&verdicts, &labels.collect(), excluded.len())?;
        let path = args.out.join(TEST_REPORT_FILE);
        write_file(&path, &serde_json::to_vec_pretty(&report)?)?;
        run.output(&path);
    }
    run.notes = serde_json::json!({ "model_version": bundle.model_version() });
    run.finish(&dir_manifest(&args.out))?;
    Ok(())
}

// ---------------------------------------------------------------- predict

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Tick log, or a dataset directory holding one.
    #[arg(long)]
    pub ticks: PathBuf,
    #[arg(long, default_value = "verdicts.jsonl")]
    pub out: PathBuf,
    /// Also write per-elimination scores here.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn load_bundle(path: &Path) -> Result<ModelBundle> {
    ModelBundle::load(path).with_context(|| format!("loading model {}", path.display()))
}

/// Verdicts of every scorable player plus the excluded ones, in input order.
pub fn predict_all(
    bundle: &ModelBundle,
    detector: &Detector,
    matches: &[aimguard_core::ingest::MatchRecord],
) -> (Vec<PlayerVerdict>, Vec<aimguard_core::inspector::ExcludedPlayer>) {
    let predictions: Vec<_> = matches.par_iter().map(|m| predict_match(bundle, detector, m)).collect();
    let mut verdicts = Vec::new();
    let mut excluded = Vec::new();
    for p in predictions {
        verdicts.extend(p.players);
        excluded.extend(p.excluded);
    }
    (verdicts, excluded)
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let mut run = Run::start("predict", &args)?;
    let bundle = load_bundle(&args.model)?;
    run.input(&args.model);
    let detector = Detector::from_bundle(&bundle).context("predict: restoring networks")?;
    let loaded = load_matches(&args.ticks, None).context("predict")?;
    loaded.files.iter().for_each(|f| run.input(f));
    let predictions: Vec<_> = loaded
        .matches
        .par_iter()
        .map(|m| predict_match(&bundle, &detector, m))
        .collect();
    let mut verdicts = Vec::new();
    let mut excluded = Vec::new();
    let mut scores = Vec::new();
    for p in predictions {
        verdicts.extend(p.players);
        excluded.extend(p.excluded);
        scores.extend(p.eliminations);
    }
    for e in &excluded {
        eprintln!("predict: skipped {}/{}: {}", e.match_id, e.player_id, e.reason);
    }
    write_file(&args.out, &jsonl(&verdicts)?)?;
    run.output(&args.out);
    if let Some(path) = &args.scores {
        write_file(path, &jsonl(&scores)?)?;
        run.output(path);
    }
    run.notes = serde_json::json!({
        "model_version": bundle.model_version(),
        "players": verdicts.len(),
        "flagged": verdicts.iter().filter(|v| v.verdict).count(),
        "excluded": excluded,
    });
    run.finish(&file_manifest(&args.out))?;
    Ok(())
}

// ---------------------------------------------------------------- explain

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ticks: PathBuf,
    #[arg(long = "match")]
    pub match_id: String,
    /// Every player of the match when omitted.
    #[arg(long)]
    pub player: Option<String>,
    /// Only the elimination at this tick.
    #[arg(long)]
    pub tick: Option<i64>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value = "stratified")]
    pub sampling: Sampling,
    /// verbatim or coverage.
    #[arg(long, default_value = "verbatim")]
    pub squeeze: SqueezeMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    ensure!(args.samples > 0, "explain: samples must be positive");
    let mut run = Run::start("explain", &args)?;
    let bundle = load_bundle(&args.model)?;
    run.input(&args.model);
    let detector = Detector::from_bundle(&bundle).context("explain: restoring networks")?;
    let loaded = load_matches(&args.ticks, None).context("explain")?;
    loaded.files.iter().for_each(|f| run.input(f));
    let record = loaded
        .matches
        .iter()
        .find(|m| m.match_id == args.match_id)
        .with_context(|| format!("explain: match {} not in {}", args.match_id, args.ticks.display()))?;
    if let Some(p) = &args.player {
        ensure!(record.player(p).is_some(), "explain: player {p} not in match {}", args.match_id);
    }
    let prediction = predict_match(&bundle, &detector, record);
    let background = background_tensors(&bundle);
    let config = ExplainConfig {
        n_samples: args.samples,
        sampling: args.sampling,
        squeeze: args.squeeze,
        seed: args.seed,
    };
    let version = bundle.model_version();
    create_dir(&args.out)?;
    let mut written = 0usize;
    for player in &record.players {
        if args.player.as_ref().is_some_and(|p| *p != player.player_id) {
            continue;
        }
        let shapley = prediction
            .players
            .iter()
            .find(|v| v.player_id == player.player_id)
            .filter(|_| !bundle.match_background.is_empty())
            .map(|v| explain_match(&bundle, &v.features.values, &bundle.match_background))
            .transpose()
            .context("explain: match-level attribution")?;
        let (windows, _) =
            extract_windows(player, &record.match_id, bundle.window.m, bundle.window.n, Screen::default());
        for window in windows.iter().filter(|w| args.tick.is_none_or(|t| t == w.elim_tick())) {
            let series = compute_features(window).with_context(|| format!("explain: features of {}", window.id()))?;
            let attribution = explain_elimination(&detector, &version, &series, &background, &config)
                .with_context(|| format!("explain: {}", window.id()))?;
            let doc = export_attribution(window, &attribution, shapley.as_ref())?;
            let path = args.out.join(format!("{}.json", sanitize(&window.id())));
            write_file(&path, &serde_json::to_vec_pretty(&doc)?)?;
            run.output(&path);
            written += 1;
        }
    }
    if written == 0 {
        eprintln!("explain: no accepted elimination windows matched the selection");
    }
    run.notes = serde_json::json!({ "model_version": version, "documents": written });
    run.finish(&dir_manifest(&args.out))?;
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Verdict JSONL from `predict`.
    #[arg(long)]
    pub verdicts: PathBuf,
    /// Label CSV, or a dataset directory holding one.
    #[arg(long)]
    pub labels: PathBuf,
    /// Second verdict file; adds a significance block comparing detection rates.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Continuity correction for the z-test.
    #[arg(long)]
    pub continuity: bool,
    /// Tick log of the same players; adds threshold baselines at their best cut.
    #[arg(long)]
    pub ticks: Option<PathBuf>,
    /// Baseline acceleration statistic: max, or pNN for a percentile.
    #[arg(long, default_value = "max")]
    pub accel_statistic: String,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub players: usize,
    pub unlabeled: usize,
    pub excluded: usize,
    pub confusion: Confusion,
    pub metrics: MetricReport,
}

type LabelMap = BTreeMap<(String, String), bool>;

fn evaluate(verdicts: &[PlayerVerdict], labels: &LabelMap, excluded: usize) -> Result<EvalReport> {
    let mut ys = Vec::new();
    let mut vs = Vec::new();
    let mut unlabeled = 0;
    for v in verdicts {
        match labels.get(&(v.match_id.clone(), v.player_id.clone())) {
            Some(&y) => {
                ys.push(y);
                vs.push(v.verdict);
            }
            None => unlabeled += 1,
        }
    }
    let c = confusion(&ys, &vs)?;
    Ok(EvalReport {
        players: ys.len(),
        unlabeled,
        excluded,
        confusion: c,
        metrics: metrics(&c),
    })
}

fn read_verdicts(path: &Path) -> Result<Vec<PlayerVerdict>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading verdicts {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: bad verdict line", path.display(), i + 1)))
        .collect()
}

fn parse_accel_statistic(s: &str) -> Result<AccelStatistic> {
    if s == "max" {
        return Ok(AccelStatistic::Max);
    }
    let q: f64 = s
        .strip_prefix('p')
        .and_then(|q| q.parse().ok())
        .with_context(|| format!("accel statistic {s:?} is neither max nor pNN"))?;
    ensure!(q > 0.0 && q <= 100.0, "percentile {q} outside (0, 100]");
    Ok(AccelStatistic::Percentile(q))
}

#[derive(Serialize)]
struct BaselineReport {
    threshold: f64,
    f1: f64,
    confusion: Confusion,
    metrics: MetricReport,
}

fn baseline(stats: &[BaselineVerdict], labels: &LabelMap) -> Result<Option<BaselineReport>> {
    let (scores, ys): (Vec<f64>, Vec<bool>) = stats
        .iter()
        .filter_map(|b| labels.get(&(b.match_id.clone(), b.player_id.clone())).map(|&y| (b.statistic, y)))
        .unzip();
    if scores.is_empty() {
        return Ok(None);
    }
    let best = best_threshold(&scores, &ys)?;
    Ok(Some(BaselineReport {
        threshold: best.threshold,
        f1: best.f1,
        confusion: best.confusion,
        metrics: metrics(&best.confusion),
    }))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let accel = parse_accel_statistic(&args.accel_statistic).context("eval")?;
    let mut run = Run::start("eval", &args)?;
    let rows = read_labels(&args.labels).context("eval")?;
    run.input(if args.labels.is_dir() { args.labels.join(LABELS_FILE) } else { args.labels.clone() });
    let labels: LabelMap = rows.iter().map(|r| ((r.match_id.clone(), r.player_id.clone()), r.is_cheater)).collect();
    let verdicts = read_verdicts(&args.verdicts).context("eval")?;
    run.input(&args.verdicts);
    let primary = evaluate(&verdicts, &labels, 0)?;
    let mut report = serde_json::to_value(&primary)?;

    if let Some(other_path) = &args.compare {
        let other = evaluate(&read_verdicts(other_path).context("eval: comparison")?, &labels, 0)?;
        run.input(other_path);
        let (a, b) = (primary.confusion, other.confusion);
        let (na, nb) = (a.tp + a.fn_, b.tp + b.fn_);
        let z = match two_proportion_z_with(a.tp, na, b.tp, nb, args.continuity) {
            Ok(z) => serde_json::to_value(z)?,
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        };
        report["significance"] = serde_json::json!({
            "detected": [a.tp, b.tp],
            "cheaters": [na, nb],
            "continuity": args.continuity,
            "z_test": z,
            "fisher_p": fisher_exact([[a.tp, a.fn_], [b.tp, b.fn_]]),
            "compare_metrics": other.metrics,
        });
    }

    if let Some(ticks) = &args.ticks {
        let loaded = load_matches(ticks, None).context("eval: baselines")?;
        loaded.files.iter().for_each(|f| run.input(f));
        let (series, _) = prepare(&loaded.matches, WindowConfig::default());
        let series: Vec<_> = series.into_iter().map(|l| l.series).collect();
        let mut baselines = serde_json::Map::new();
        if !series.is_empty() {
            let stats = acceleration_statistic(&series, accel)?;
            if let Some(b) = baseline(&stats, &labels)? {
                baselines.insert("th_acc_a".into(), serde_json::to_value(b)?);
            }
        }
        if let Ok((stats, _)) = hit_accuracy(&loaded.matches) {
            if let Some(b) = baseline(&stats, &labels)? {
                baselines.insert("th_hit_acc".into(), serde_json::to_value(b)?);
            }
        }
        report["baselines"] = serde_json::Value::Object(baselines);
    }

    write_file(&args.out, &serde_json::to_vec_pretty(&report)?)?;
    run.output(&args.out);
    run.finish(&file_manifest(&args.out))?;
    let m = &primary.metrics;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "players {}  recall {:.3}  fpr {:.3}  f1 {:.3}  weighted f1 {:.3}",
        primary.players, m.plain.recall, m.plain.fpr, m.plain.f1, m.weighted.f1
    )?;
    Ok(())
}
