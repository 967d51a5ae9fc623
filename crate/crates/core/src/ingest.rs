//! Normalized tick-log ingestion.
//!
//! A tick log is a flat table with one row per (match, player, tick):
//!
//! ```text
//! tick,pitch,yaw,fired,eliminated,hit,player_id,match_id
//! 10,0.000000,0.000000,false,true,,p1,m1
//! ```
//!
//! The same rows may be given as JSON lines with identical field names.
//! Angles are validated on the way in; a row outside the angle box never
//! reaches downstream stages. Duplicate and missing ticks are kept and
//! reported as warnings so that window extraction can decide what to drop.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CS2 server tick rate.
pub const DEFAULT_TICK_RATE: u32 = 64;

pub const PITCH_RANGE: (f64, f64) = (-90.0, 90.0);
pub const YAW_RANGE: (f64, f64) = (-180.0, 180.0);

const CSV_HEADER: [&str; 8] = [
    "tick",
    "pitch",
    "yaw",
    "fired",
    "eliminated",
    "hit",
    "player_id",
    "match_id",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: {field} out of range: {value}")]
    RangeViolation {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("unknown tick-log format {0:?} (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl LogFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => LogFormat::Jsonl,
            _ => LogFormat::Csv,
        }
    }
}

impl std::str::FromStr for LogFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(LogFormat::Csv),
            "jsonl" | "ndjson" => Ok(LogFormat::Jsonl),
            other => Err(IngestError::UnknownFormat(other.to_string())),
        }
    }
}

/// One server tick of one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: i64,
    pub pitch: f64,
    pub yaw: f64,
    pub fired: bool,
    pub eliminated: bool,
    /// Only present when the log carries weapon hit information.
    pub hit: Option<bool>,
    pub player_id: String,
    pub match_id: String,
}

impl TickRecord {
    fn validate(&self, line: usize) -> Result<(), IngestError> {
        if !self.pitch.is_finite() || self.pitch < PITCH_RANGE.0 || self.pitch > PITCH_RANGE.1 {
            return Err(IngestError::RangeViolation {
                line,
                field: "pitch",
                value: self.pitch,
            });
        }
        if !self.yaw.is_finite() || self.yaw < YAW_RANGE.0 || self.yaw > YAW_RANGE.1 {
            return Err(IngestError::RangeViolation {
                line,
                field: "yaw",
                value: self.yaw,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerStream {
    pub player_id: String,
    pub ticks: Vec<TickRecord>,
}

impl PlayerStream {
    pub fn elimination_count(&self) -> usize {
        self.ticks.iter().filter(|t| t.eliminated).count()
    }

    pub fn has_hit_column(&self) -> bool {
        self.ticks.iter().any(|t| t.hit.is_some())
    }
}

/// Irregularities found while parsing that cleansing handles later.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestWarning {
    DuplicateTick { player_id: String, tick: i64 },
    MissingTicks { player_id: String, after: i64, before: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub players: Vec<PlayerStream>,
    /// Ground-truth cheater labels; empty outside training and evaluation.
    pub label_map: BTreeMap<String, bool>,
    pub tick_rate: u32,
    pub warnings: Vec<IngestWarning>,
}

impl MatchRecord {
    pub fn player(&self, player_id: &str) -> Option<&PlayerStream> {
        self.players.iter().find(|p| p.player_id == player_id)
    }

    pub fn label(&self, player_id: &str) -> Option<bool> {
        self.label_map.get(player_id).copied()
    }
}

#[derive(Deserialize)]
struct JsonRow {
    tick: i64,
    pitch: f64,
    yaw: f64,
    fired: bool,
    eliminated: bool,
    #[serde(default)]
    hit: Option<bool>,
    player_id: String,
    match_id: String,
}

fn parse_bool(s: &str, column: &str, line: usize) -> Result<bool, IngestError> {
    match s.trim() {
        "true" | "True" | "TRUE" | "1" => Ok(true),
        "false" | "False" | "FALSE" | "0" => Ok(false),
        other => Err(IngestError::MalformedRow {
            line,
            reason: format!("{column}: expected boolean, got {other:?}"),
        }),
    }
}

fn parse_f64(s: &str, column: &str, line: usize) -> Result<f64, IngestError> {
    s.trim().parse::<f64>().map_err(|e| IngestError::MalformedRow {
        line,
        reason: format!("{column}: {e}"),
    })
}

fn parse_csv_rows<R: Read>(source: R) -> Result<Vec<TickRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let header: Vec<&str> = headers.iter().map(str::trim).collect();
    if header != CSV_HEADER {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: format!("unexpected header {header:?}, expected {CSV_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != CSV_HEADER.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} columns, got {}", CSV_HEADER.len(), record.len()),
            });
        }
        let tick = record[0]
            .trim()
            .parse::<i64>()
            .map_err(|e| IngestError::MalformedRow {
                line,
                reason: format!("tick: {e}"),
            })?;
        let hit = match record[5].trim() {
            "" => None,
            s => Some(parse_bool(s, "hit", line)?),
        };
        let row = TickRecord {
            tick,
            pitch: parse_f64(&record[1], "pitch", line)?,
            yaw: parse_f64(&record[2], "yaw", line)?,
            fired: parse_bool(&record[3], "fired", line)?,
            eliminated: parse_bool(&record[4], "eliminated", line)?,
            hit,
            player_id: record[6].to_string(),
            match_id: record[7].to_string(),
        };
        row.validate(line)?;
        rows.push(row);
    }
    Ok(rows)
}

fn parse_jsonl_rows<R: Read>(source: R) -> Result<Vec<TickRecord>, IngestError> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRow = serde_json::from_str(&line).map_err(|e| IngestError::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let row = TickRecord {
            tick: raw.tick,
            pitch: raw.pitch,
            yaw: raw.yaw,
            fired: raw.fired,
            eliminated: raw.eliminated,
            hit: raw.hit,
            player_id: raw.player_id,
            match_id: raw.match_id,
        };
        row.validate(line_no)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Groups validated rows into matches and player streams.
///
/// Matches and players keep first-appearance order; ticks inside a stream are
/// stably sorted so duplicates stay adjacent.
fn assemble(rows: Vec<TickRecord>) -> Vec<MatchRecord> {
    let mut match_order: Vec<String> = Vec::new();
    let mut by_match: HashMap<String, (Vec<String>, HashMap<String, Vec<TickRecord>>)> =
        HashMap::new();
    for row in rows {
        let entry = by_match.entry(row.match_id.clone()).or_insert_with(|| {
            match_order.push(row.match_id.clone());
            (Vec::new(), HashMap::new())
        });
        let (player_order, streams) = entry;
        streams
            .entry(row.player_id.clone())
            .or_insert_with(|| {
                player_order.push(row.player_id.clone());
                Vec::new()
            })
            .push(row);
    }

    match_order
        .into_iter()
        .map(|match_id| {
            let (player_order, mut streams) = by_match.remove(&match_id).unwrap_or_default();
            let mut warnings = Vec::new();
            let players = player_order
                .into_iter()
                .map(|player_id| {
                    let mut ticks = streams.remove(&player_id).unwrap_or_default();
                    ticks.sort_by_key(|t| t.tick);
                    for pair in ticks.windows(2) {
                        let (a, b) = (pair[0].tick, pair[1].tick);
                        if a == b {
                            warnings.push(IngestWarning::DuplicateTick {
                                player_id: player_id.clone(),
                                tick: a,
                            });
                        } else if b > a + 1 {
                            warnings.push(IngestWarning::MissingTicks {
                                player_id: player_id.clone(),
                                after: a,
                                before: b,
                            });
                        }
                    }
                    PlayerStream { player_id, ticks }
                })
                .collect();
            MatchRecord {
                match_id,
                players,
                label_map: BTreeMap::new(),
                tick_rate: DEFAULT_TICK_RATE,
                warnings,
            }
        })
        .collect()
}

/// Parses a tick log into match records.
pub fn parse_tick_log<R: Read>(source: R, format: LogFormat) -> Result<Vec<MatchRecord>, IngestError> {
    let rows = match format {
        LogFormat::Csv => parse_csv_rows(source)?,
        LogFormat::Jsonl => parse_jsonl_rows(source)?,
    };
    Ok(assemble(rows))
}

/// Canonical text for an angle: fixed six decimal places.
pub fn format_angle(v: f64) -> String {
    format!("{v:.6}")
}

/// Rounds a value onto the six-decimal grid used by the log format.
pub fn canonical_angle(v: f64) -> f64 {
    format_angle(v).parse().expect("formatted float re-parses")
}

/// Writes matches in canonical order and formatting.
pub fn write_tick_log<W: Write>(
    matches: &[MatchRecord],
    format: LogFormat,
    sink: W,
) -> Result<(), IngestError> {
    match format {
        LogFormat::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(sink);
            writer.write_record(CSV_HEADER)?;
            for m in matches {
                for p in &m.players {
                    for t in &p.ticks {
                        let hit = match t.hit {
                            Some(h) => h.to_string(),
                            None => String::new(),
                        };
                        writer.write_record([
                            t.tick.to_string(),
                            format_angle(t.pitch),
                            format_angle(t.yaw),
                            t.fired.to_string(),
                            t.eliminated.to_string(),
                            hit,
                            t.player_id.clone(),
                            t.match_id.clone(),
                        ])?;
                    }
                }
            }
            writer.flush()?;
        }
        LogFormat::Jsonl => {
            let mut sink = std::io::BufWriter::new(sink);
            for m in matches {
                for p in &m.players {
                    for t in &p.ticks {
                        let hit = match t.hit {
                            Some(h) => h.to_string(),
                            None => "null".to_string(),
                        };
                        writeln!(
                            sink,
                            "{{\"tick\":{},\"pitch\":{},\"yaw\":{},\"fired\":{},\"eliminated\":{},\"hit\":{},\"player_id\":{},\"match_id\":{}}}",
                            t.tick,
                            format_angle(t.pitch),
                            format_angle(t.yaw),
                            t.fired,
                            t.eliminated,
                            hit,
                            serde_json::to_string(&t.player_id).expect("string serializes"),
                            serde_json::to_string(&t.match_id).expect("string serializes"),
                        )?;
                    }
                }
            }
            sink.flush()?;
        }
    }
    Ok(())
}

/// Convenience wrapper around [`write_tick_log`] returning the bytes.
pub fn tick_log_bytes(matches: &[MatchRecord], format: LogFormat) -> Vec<u8> {
    let mut out = Vec::new();
    write_tick_log(matches, format, &mut out).expect("writing to a Vec cannot fail");
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub match_id: String,
    pub player_id: String,
    pub is_cheater: bool,
}

/// Parses a `match_id,player_id,is_cheater` labels file.
pub fn parse_labels<R: Read>(source: R) -> Result<Vec<LabelRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 3 columns, got {}", record.len()),
            });
        }
        out.push(LabelRow {
            match_id: record[0].to_string(),
            player_id: record[1].to_string(),
            is_cheater: parse_bool(&record[2], "is_cheater", line)?,
        });
    }
    Ok(out)
}

pub fn write_labels<W: Write>(labels: &[LabelRow], sink: W) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    writer.write_record(["match_id", "player_id", "is_cheater"])?;
    for l in labels {
        writer.write_record([l.match_id.as_str(), l.player_id.as_str(), if l.is_cheater { "true" } else { "false" }])?;
    }
    writer.flush()?;
    Ok(())
}

/// Copies labels into the matching records' label maps. Labels for unknown
/// matches are ignored.
pub fn attach_labels(matches: &mut [MatchRecord], labels: &[LabelRow]) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, m) in matches.iter().enumerate() {
        index.insert(m.match_id.as_str(), i);
    }
    let mut pending: Vec<(usize, String, bool)> = Vec::new();
    for l in labels {
        if let Some(&i) = index.get(l.match_id.as_str()) {
            pending.push((i, l.player_id.clone(), l.is_cheater));
        }
    }
    for (i, player, label) in pending {
        matches[i].label_map.insert(player, label);
    }
}

/// Flattens the label maps of `matches` into label rows.
pub fn collect_labels(matches: &[MatchRecord]) -> Vec<LabelRow> {
    matches
        .iter()
        .flat_map(|m| {
            m.label_map.iter().map(move |(p, &l)| LabelRow {
                match_id: m.match_id.clone(),
                player_id: p.clone(),
                is_cheater: l,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "tick,pitch,yaw,fired,eliminated,hit,player_id,match_id\n";

    #[test]
    fn minimal_row_parses() {
        let src = format!("{HEADER}10,0.0,0.0,false,true,false,p1,m1\n");
        let matches = parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].players.len(), 1);
        assert_eq!(matches[0].players[0].ticks.len(), 1);
        let t = &matches[0].players[0].ticks[0];
        assert_eq!(t.tick, 10);
        assert!(t.eliminated && !t.fired);
        assert_eq!(t.hit, Some(false));
        assert_eq!(matches[0].tick_rate, 64);
    }

    #[test]
    fn pitch_out_of_range_is_rejected_with_line() {
        let src = format!("{HEADER}1,0.0,0.0,false,false,,p1,m1\n2,95,0.0,false,false,,p1,m1\n");
        match parse_tick_log(src.as_bytes(), LogFormat::Csv) {
            Err(IngestError::RangeViolation { line, field, value }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "pitch");
                assert_eq!(value, 95.0);
            }
            other => panic!("expected range violation, got {other:?}"),
        }
    }

    #[test]
    fn yaw_out_of_range_is_rejected() {
        let src = format!("{HEADER}1,0.0,-180.5,false,false,,p1,m1\n");
        let err = parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::RangeViolation { field: "yaw", .. }));
    }

    #[test]
    fn malformed_rows_report_line() {
        let src = format!("{HEADER}1,abc,0.0,false,false,,p1,m1\n");
        let err = parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 2, .. }), "{err}");

        let src = format!("{HEADER}1,0.0,0.0,maybe,false,,p1,m1\n");
        let err = parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 2, .. }));

        let err = parse_tick_log("tick,pitch\n1,2\n".as_bytes(), LogFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 1, .. }));
    }

    #[test]
    fn duplicates_and_gaps_become_warnings() {
        let src = format!(
            "{HEADER}1,0,0,false,false,,p1,m1\n2,0,0,false,false,,p1,m1\n2,0,0,false,false,,p1,m1\n5,0,0,false,false,,p1,m1\n"
        );
        let m = &parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap()[0];
        assert_eq!(m.players[0].ticks.len(), 4);
        assert_eq!(
            m.warnings,
            vec![
                IngestWarning::DuplicateTick { player_id: "p1".into(), tick: 2 },
                IngestWarning::MissingTicks { player_id: "p1".into(), after: 2, before: 5 },
            ]
        );
    }

    #[test]
    fn empty_list_writes_header_only() {
        let out = tick_log_bytes(&[], LogFormat::Csv);
        assert_eq!(String::from_utf8(out).unwrap(), HEADER);
        assert!(tick_log_bytes(&[], LogFormat::Jsonl).is_empty());
    }

    #[test]
    fn floats_use_six_decimals() {
        let v = 0.1 + 0.2;
        assert_eq!(format_angle(v), "0.300000");
        let src = format!("{HEADER}1,{},{},true,false,,p1,m1\n", format_angle(v), format_angle(-v));
        let parsed = parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(parsed[0].players[0].ticks[0].pitch, 0.3);
        let rewritten = tick_log_bytes(&parsed, LogFormat::Csv);
        assert_eq!(String::from_utf8(rewritten).unwrap(), src);
    }

    #[test]
    fn jsonl_parses_and_round_trips() {
        let src = "{\"tick\":3,\"pitch\":1.5,\"yaw\":-2.25,\"fired\":true,\"eliminated\":false,\"hit\":null,\"player_id\":\"a,b\",\"match_id\":\"m\"}\n";
        let parsed = parse_tick_log(src.as_bytes(), LogFormat::Jsonl).unwrap();
        assert_eq!(parsed[0].players[0].player_id, "a,b");
        let bytes = tick_log_bytes(&parsed, LogFormat::Jsonl);
        let again = parse_tick_log(bytes.as_slice(), LogFormat::Jsonl).unwrap();
        assert_eq!(parsed, again);
        let csv = tick_log_bytes(&parsed, LogFormat::Csv);
        assert_eq!(parse_tick_log(csv.as_slice(), LogFormat::Csv).unwrap(), parsed);
    }

    #[test]
    fn labels_attach_to_matches() {
        let labels = "match_id,player_id,is_cheater\nm1,p1,true\nm1,p2,false\nm9,p1,true\n";
        let rows = parse_labels(labels.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        let src = format!("{HEADER}1,0,0,false,false,,p1,m1\n");
        let mut matches = parse_tick_log(src.as_bytes(), LogFormat::Csv).unwrap();
        attach_labels(&mut matches, &rows);
        assert_eq!(matches[0].label(&"p1".to_string()), Some(true));
        assert_eq!(matches[0].label("p2"), Some(false));
        let mut out = Vec::new();
        write_labels(&collect_labels(&matches), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "match_id,player_id,is_cheater\nm1,p1,true\nm1,p2,false\n");
    }
}
