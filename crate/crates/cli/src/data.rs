//! Locating tick logs and label files on disk.

use std::path::{Path, PathBuf};

use aimguard_core::ingest::{attach_labels, parse_labels, parse_tick_log, LabelRow, LogFormat, MatchRecord};
use aimguard_core::simulator::{LABELS_FILE, TICKS_FILE};
use anyhow::{bail, Context, Result};

/// Tick log inside a dataset directory, or the path itself.
pub fn tick_path(path: &Path) -> Result<PathBuf> {
    if !path.is_dir() {
        return Ok(path.to_path_buf());
    }
    for name in [TICKS_FILE, "ticks.jsonl"] {
        let p = path.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    bail!("{} holds neither {TICKS_FILE} nor ticks.jsonl", path.display())
}

/// `labels.csv` inside a dataset directory or next to a tick log, if present.
pub fn sibling_labels(path: &Path) -> Option<PathBuf> {
    let dir = if path.is_dir() { path } else { path.parent()? };
    let p = dir.join(LABELS_FILE);
    p.is_file().then_some(p)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let path = if path.is_dir() { path.join(LABELS_FILE) } else { path.to_path_buf() };
    let file = std::fs::File::open(&path).with_context(|| format!("opening labels {}", path.display()))?;
    parse_labels(file).with_context(|| format!("parsing labels {}", path.display()))
}

/// Parsed matches plus every file that was read.
pub struct Loaded {
    pub matches: Vec<MatchRecord>,
    pub files: Vec<PathBuf>,
}

/// Reads a tick log (file or dataset directory) and attaches labels from
/// `labels`, or from a sibling `labels.csv` when none is given.
pub fn load_matches(path: &Path, labels: Option<&Path>) -> Result<Loaded> {
    let ticks = tick_path(path)?;
    let file = std::fs::File::open(&ticks).with_context(|| format!("opening tick log {}", ticks.display()))?;
    let mut matches = parse_tick_log(std::io::BufReader::new(file), LogFormat::from_path(&ticks))
        .with_context(|| format!("parsing tick log {}", ticks.display()))?;
    let mut files = vec![ticks];
    let label_path = labels.map(Path::to_path_buf).or_else(|| sibling_labels(path));
    if let Some(lp) = label_path {
        let rows = read_labels(&lp)?;
        attach_labels(&mut matches, &rows);
        files.push(if lp.is_dir() { lp.join(LABELS_FILE) } else { lp });
    }
    Ok(Loaded { matches, files })
}

/// File name for an elimination id such as `m00001/p03/812`.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}
