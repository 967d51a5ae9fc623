use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::player::{gen_player, ScenarioTruth};
use super::profile::{BehaviorKind, BehaviorProfile, ProfileMix, TickRange};
use crate::ingest::{self, IngestError, LabelRow, LogFormat, MatchRecord, DEFAULT_TICK_RATE};
use crate::trajectory::Screen;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub matches: usize,
    pub players: usize,
    /// Cheaters per match are `round(cheater_frac * players)`.
    pub cheater_frac: f64,
    pub profile_mix: ProfileMix,
    /// Kills per player, drawn per player.
    pub eliminations: TickRange,
    pub seed: u64,
    /// Match ids are numbered from here, so splits can share one namespace.
    pub first_match: usize,
    /// Replaces the smoothing of aimbot profiles when set.
    pub smoothing_override: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            matches: 20,
            players: 10,
            cheater_frac: 0.10,
            profile_mix: ProfileMix::blatant(),
            eliminations: TickRange::new(2, 4),
            seed: 0,
            first_match: 0,
            smoothing_override: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimulatorError {
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error("no cheater matches to select from")]
    NoCheaters,
    #[error("no non-cheater matches to compare against")]
    NoNormals,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub matches: Vec<MatchRecord>,
    pub labels: Vec<LabelRow>,
    pub truth: Vec<ScenarioTruth>,
    pub profiles: BTreeMap<(String, String), BehaviorProfile>,
}

pub fn match_name(i: usize) -> String {
    format!("m{i:05}")
}

pub fn player_name(i: usize) -> String {
    format!("p{i:02}")
}

/// Stream seed for one player, independent of generation order.
pub fn player_seed(seed: u64, match_index: usize, player_index: usize) -> u64 {
    // SplitMix64 finaliser over the packed coordinates.
    let mut z = seed
        .wrapping_add((match_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((player_index as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn validate(config: &DatasetConfig) -> Result<(), SimulatorError> {
    let bad = |m: &str| Err(SimulatorError::InvalidConfig(m.to_string()));
    if config.matches == 0 || config.players == 0 {
        return bad("matches and players must be at least 1");
    }
    if !(0.0..=1.0).contains(&config.cheater_frac) {
        return bad("cheater_frac must lie in [0, 1]");
    }
    if config.eliminations.min == 0 || config.eliminations.min > config.eliminations.max {
        return bad("eliminations range must be non-empty and positive");
    }
    let mix = &config.profile_mix;
    if config.cheater_frac > 0.0 && !(mix.aimbot + mix.wallhack + mix.hybrid + mix.mimic > 0.0) {
        return bad("profile mix has no positive weight");
    }
    if let Some(s) = config.smoothing_override {
        if !(0.0..=1.0).contains(&s) {
            return bad("smoothing must lie in [0, 1]");
        }
    }
    Ok(())
}

/// Generates a labeled dataset. Same config, same bytes.
pub fn gen_dataset(config: &DatasetConfig) -> Result<Dataset, SimulatorError> {
    validate(config)?;
    let screen = Screen::default();
    let cheaters = (config.cheater_frac * config.players as f64).round() as usize;
    let mut out = Dataset {
        matches: Vec::with_capacity(config.matches),
        labels: Vec::new(),
        truth: Vec::new(),
        profiles: BTreeMap::new(),
    };
    for mi in config.first_match..config.first_match + config.matches {
        let match_id = match_name(mi);
        let mut match_rng = ChaCha8Rng::seed_from_u64(player_seed(config.seed, mi, usize::MAX - 1));
        let mut slots: Vec<usize> = (0..config.players).collect();
        slots.shuffle(&mut match_rng);
        let cheater_slots = &slots[..cheaters.min(config.players)];

        let mut record = MatchRecord {
            match_id: match_id.clone(),
            players: Vec::with_capacity(config.players),
            label_map: BTreeMap::new(),
            tick_rate: DEFAULT_TICK_RATE,
            warnings: Vec::new(),
        };
        for pi in 0..config.players {
            let player_id = player_name(pi);
            let mut rng = ChaCha8Rng::seed_from_u64(player_seed(config.seed, mi, pi));
            let mut profile = if cheater_slots.contains(&pi) {
                config.profile_mix.pick(rng.random::<f64>())
            } else {
                BehaviorProfile::normal()
            };
            if let (Some(s), BehaviorKind::Aimbot) = (config.smoothing_override, profile.kind) {
                profile.smoothing = s;
            }
            let kills = rng.random_range(config.eliminations.min..=config.eliminations.max) as usize;
            let (stream, truth) = gen_player(&profile, kills, &match_id, &player_id, screen, &mut rng);
            let label = profile.kind.is_cheater();
            record.label_map.insert(player_id.clone(), label);
            out.labels.push(LabelRow {
                match_id: match_id.clone(),
                player_id: player_id.clone(),
                is_cheater: label,
            });
            out.truth.extend(truth);
            out.profiles.insert((match_id.clone(), player_id), profile);
            record.players.push(stream);
        }
        out.matches.push(record);
    }
    Ok(out)
}

pub const TICKS_FILE: &str = "ticks.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const TRUTH_FILE: &str = "truth.jsonl";

/// Writes `ticks.csv`, `labels.csv` and `truth.jsonl` into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), SimulatorError> {
    std::fs::create_dir_all(dir)?;
    let mut ticks = BufWriter::new(File::create(dir.join(TICKS_FILE))?);
    ingest::write_tick_log(&dataset.matches, LogFormat::Csv, &mut ticks)?;
    ticks.flush()?;
    let labels = BufWriter::new(File::create(dir.join(LABELS_FILE))?);
    ingest::write_labels(&dataset.labels, labels)?;
    let mut truth = BufWriter::new(File::create(dir.join(TRUTH_FILE))?);
    write_truth(&dataset.truth, &mut truth)?;
    truth.flush()?;
    Ok(())
}

pub fn write_truth<W: Write>(truth: &[ScenarioTruth], mut sink: W) -> Result<(), SimulatorError> {
    for t in truth {
        serde_json::to_writer(&mut sink, t)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_truth<R: std::io::BufRead>(source: R) -> Result<Vec<ScenarioTruth>, SimulatorError> {
    let mut out = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
