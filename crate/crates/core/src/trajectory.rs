//! Crosshair trajectory reconstruction.
//!
//! View angles map onto a virtual screen: yaw spans the full width, pitch the
//! full height, and the y axis points down so that looking straight up lands
//! on the top edge. Elimination windows are cut from a player's stream with one
//! extra leading tick so that feature construction, which consumes the first
//! point as history, still yields exactly `m + n` tuples.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{PlayerStream, TickRecord, PITCH_RANGE, YAW_RANGE};

pub const DEFAULT_WIDTH: f64 = 1920.0;
pub const DEFAULT_HEIGHT: f64 = 1080.0;
pub const DEFAULT_M: usize = 64;
pub const DEFAULT_N: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("{field} = {value} outside its domain")]
    DomainError { field: &'static str, value: f64 },
}

/// Screen geometry used for the angle-to-pixel mapping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub width: f64,
    pub height: f64,
}

impl Default for Screen {
    fn default() -> Self {
        Screen {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
        }
    }
}

pub fn pitch_yaw_to_xy(pitch: f64, yaw: f64, width: f64, height: f64) -> Result<(f64, f64), TrajectoryError> {
    if !(PITCH_RANGE.0..=PITCH_RANGE.1).contains(&pitch) {
        return Err(TrajectoryError::DomainError { field: "pitch", value: pitch });
    }
    if !(YAW_RANGE.0..=YAW_RANGE.1).contains(&yaw) {
        return Err(TrajectoryError::DomainError { field: "yaw", value: yaw });
    }
    if !(width > 0.0) {
        return Err(TrajectoryError::DomainError { field: "width", value: width });
    }
    if !(height > 0.0) {
        return Err(TrajectoryError::DomainError { field: "height", value: height });
    }
    let x = (yaw + 180.0) / 360.0 * width;
    let y = height - (pitch + 90.0) / 180.0 * height;
    Ok((x, y))
}

/// Inverse of [`pitch_yaw_to_xy`]; returns `(pitch, yaw)`.
pub fn xy_to_pitch_yaw(x: f64, y: f64, width: f64, height: f64) -> Result<(f64, f64), TrajectoryError> {
    if !(0.0..=width).contains(&x) {
        return Err(TrajectoryError::DomainError { field: "x", value: x });
    }
    if !(0.0..=height).contains(&y) {
        return Err(TrajectoryError::DomainError { field: "y", value: y });
    }
    let yaw = x / width * 360.0 - 180.0;
    let pitch = (height - y) / height * 180.0 - 90.0;
    Ok((pitch.clamp(PITCH_RANGE.0, PITCH_RANGE.1), yaw.clamp(YAW_RANGE.0, YAW_RANGE.1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub tick: i64,
    pub x: f64,
    pub y: f64,
    pub fired: bool,
    pub eliminated: bool,
}

impl ScreenPoint {
    pub fn from_tick(record: &TickRecord, screen: Screen) -> Result<Self, TrajectoryError> {
        let (x, y) = pitch_yaw_to_xy(record.pitch, record.yaw, screen.width, screen.height)?;
        Ok(ScreenPoint {
            tick: record.tick,
            x,
            y,
            fired: record.fired,
            eliminated: record.eliminated,
        })
    }
}

/// `m + n + 1` consecutive screen points around one elimination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawWindow {
    pub points: Vec<ScreenPoint>,
    /// Index of the elimination tick within `points` (always `m`).
    pub elim_tick_index: usize,
    pub player_id: String,
    pub match_id: String,
}

impl RawWindow {
    pub fn elim_tick(&self) -> i64 {
        self.points[self.elim_tick_index].tick
    }

    /// Stable identifier `match/player/tick`.
    pub fn id(&self) -> String {
        elimination_id(&self.match_id, &self.player_id, self.elim_tick())
    }
}

pub fn elimination_id(match_id: &str, player_id: &str, elim_tick: i64) -> String {
    format!("{match_id}/{player_id}/{elim_tick}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCause {
    /// Fewer than `m` ticks before or `n` ticks after the elimination:
    /// disconnect, match end or side switch.
    Truncated,
    /// A tick inside the window is missing.
    GlitchMissing,
    /// A tick inside the window appears more than once.
    GlitchDuplicate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CleansingReport {
    pub eliminations: usize,
    pub accepted: usize,
    pub no_elimination_player: bool,
    pub truncated: usize,
    pub glitch_missing: usize,
    pub glitch_duplicate: usize,
    pub rejected: Vec<(i64, RejectCause)>,
}

impl CleansingReport {
    fn reject(&mut self, tick: i64, cause: RejectCause) {
        match cause {
            RejectCause::Truncated => self.truncated += 1,
            RejectCause::GlitchMissing => self.glitch_missing += 1,
            RejectCause::GlitchDuplicate => self.glitch_duplicate += 1,
        }
        self.rejected.push((tick, cause));
    }

    pub fn merge(&mut self, other: &CleansingReport) {
        self.eliminations += other.eliminations;
        self.accepted += other.accepted;
        self.truncated += other.truncated;
        self.glitch_missing += other.glitch_missing;
        self.glitch_duplicate += other.glitch_duplicate;
        self.rejected.extend_from_slice(&other.rejected);
    }
}

/// Cuts one window per elimination event that passes cleansing.
///
/// The raw window spans ticks `e - m ..= e + n` for an elimination at tick
/// `e`. Windows of nearby eliminations may overlap; each is emitted.
pub fn extract_windows(
    stream: &PlayerStream,
    match_id: &str,
    m: usize,
    n: usize,
    screen: Screen,
) -> (Vec<RawWindow>, CleansingReport) {
    assert!(m >= 1 && n >= 1, "window split must be positive");
    let mut report = CleansingReport::default();
    let ticks = &stream.ticks;

    let mut elim_ticks: Vec<i64> = ticks.iter().filter(|t| t.eliminated).map(|t| t.tick).collect();
    elim_ticks.dedup();
    if elim_ticks.is_empty() {
        report.no_elimination_player = true;
        return (Vec::new(), report);
    }
    report.eliminations = elim_ticks.len();

    let (first, last) = (ticks[0].tick, ticks[ticks.len() - 1].tick);
    let mut windows = Vec::new();
    for e in elim_ticks {
        let start = e - m as i64;
        let end = e + n as i64;
        if start < first || end > last {
            report.reject(e, RejectCause::Truncated);
            continue;
        }
        let lo = ticks.partition_point(|t| t.tick < start);
        let hi = ticks.partition_point(|t| t.tick <= end);
        let slice = &ticks[lo..hi];
        if slice.windows(2).any(|p| p[0].tick == p[1].tick) {
            report.reject(e, RejectCause::GlitchDuplicate);
            continue;
        }
        if slice.len() != m + n + 1 {
            report.reject(e, RejectCause::GlitchMissing);
            continue;
        }
        let points: Result<Vec<_>, _> = slice.iter().map(|t| ScreenPoint::from_tick(t, screen)).collect();
        // Ingest already validated the angle box.
        let points = points.expect("ingested angles are in range");
        windows.push(RawWindow {
            points,
            elim_tick_index: m,
            player_id: stream.player_id.clone(),
            match_id: match_id.to_string(),
        });
        report.accepted += 1;
    }
    (windows, report)
}

/// Diverging blue-white-red color for a value scaled into `[-1, 1]`.
pub fn diverging_color(scaled: f64) -> (u8, u8, u8) {
    let s = if scaled.is_finite() { scaled.clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if s >= 0.0 {
        (255, fade(s), fade(s))
    } else {
        (fade(-s), fade(-s), 255)
    }
}

/// Scalar key that orders diverging colors the same way as their values.
pub fn color_order_key(rgb: (u8, u8, u8)) -> i32 {
    rgb.0 as i32 - rgb.2 as i32
}

fn hex(rgb: (u8, u8, u8)) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb.0, rgb.1, rgb.2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub color: String,
    pub rgb: (u8, u8, u8),
}

/// Vector description of one rendered trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDrawing {
    pub width: f64,
    pub height: f64,
    pub segments: Vec<Segment>,
    pub fire_markers: Vec<(f64, f64)>,
    pub elimination_marker: Option<(f64, f64)>,
}

const NEUTRAL: (u8, u8, u8) = (40, 40, 40);

/// Lays out a trajectory with the elimination point moved to the screen
/// center. `overlay`, when given, holds one value per point; segment `i`
/// (from point `i` to `i + 1`) takes the color of point `i + 1`, scaled by the
/// largest absolute overlay value.
pub fn render_trajectory(points: &[ScreenPoint], overlay: Option<&[f64]>, width: f64, height: f64) -> TrajectoryDrawing {
    let anchor = points
        .iter()
        .find(|p| p.eliminated)
        .or_else(|| points.last())
        .map(|p| (p.x, p.y))
        .unwrap_or((width / 2.0, height / 2.0));
    let (dx, dy) = (width / 2.0 - anchor.0, height / 2.0 - anchor.1);
    let at = |p: &ScreenPoint| (p.x + dx, p.y + dy);

    let scale = overlay
        .map(|v| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
        .unwrap_or(0.0);
    let segments = points
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let rgb = match overlay {
                Some(values) if scale > 0.0 => diverging_color(values[i + 1] / scale),
                Some(_) => diverging_color(0.0),
                None => NEUTRAL,
            };
            Segment {
                from: at(&pair[0]),
                to: at(&pair[1]),
                color: hex(rgb),
                rgb,
            }
        })
        .collect();
    TrajectoryDrawing {
        width,
        height,
        segments,
        fire_markers: points.iter().filter(|p| p.fired).map(at).collect(),
        elimination_marker: points.iter().find(|p| p.eliminated).map(at),
    }
}

impl TrajectoryDrawing {
    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#f8f8f8"/>"##);
        for seg in &self.segments {
            let _ = writeln!(
                s,
                r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{}" stroke-width="2"/>"#,
                seg.from.0, seg.from.1, seg.to.0, seg.to.1, seg.color
            );
        }
        for &(x, y) in &self.fire_markers {
            let _ = writeln!(
                s,
                r##"<polygon class="fire" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="#ff9900"/>"##,
                x,
                y - 6.0,
                x - 5.0,
                y + 4.0,
                x + 5.0,
                y + 4.0
            );
        }
        if let Some((x, y)) = self.elimination_marker {
            let _ = writeln!(
                s,
                r##"<path class="elimination" d="M {:.3} {:.3} L {:.3} {:.3} M {:.3} {:.3} L {:.3} {:.3}" stroke="#000000" stroke-width="3"/>"##,
                x - 8.0,
                y - 8.0,
                x + 8.0,
                y + 8.0,
                x - 8.0,
                y + 8.0,
                x + 8.0,
                y - 8.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TickRecord;

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn corners_and_center() {
        assert!(close(pitch_yaw_to_xy(0.0, 0.0, 1920.0, 1080.0).unwrap(), (960.0, 540.0)));
        assert!(close(pitch_yaw_to_xy(90.0, 180.0, 1920.0, 1080.0).unwrap(), (1920.0, 0.0)));
        assert!(close(pitch_yaw_to_xy(-90.0, -180.0, 1920.0, 1080.0).unwrap(), (0.0, 1080.0)));
    }

    #[test]
    fn out_of_domain_angles_error() {
        assert!(matches!(
            pitch_yaw_to_xy(90.5, 0.0, 1920.0, 1080.0),
            Err(TrajectoryError::DomainError { field: "pitch", .. })
        ));
        assert!(pitch_yaw_to_xy(0.0, -181.0, 1920.0, 1080.0).is_err());
        assert!(pitch_yaw_to_xy(0.0, 0.0, 0.0, 1080.0).is_err());
    }

    fn tick(t: i64, eliminated: bool) -> TickRecord {
        TickRecord {
            tick: t,
            pitch: 0.0,
            yaw: (t % 100) as f64 * 0.5,
            fired: false,
            eliminated,
            hit: None,
            player_id: "p".into(),
            match_id: "m".into(),
        }
    }

    fn stream(ticks: Vec<TickRecord>) -> PlayerStream {
        PlayerStream { player_id: "p".into(), ticks }
    }

    #[test]
    fn window_has_one_leading_history_tick() {
        let s = stream((0..40).map(|t| tick(t, t == 20)).collect());
        let (w, report) = extract_windows(&s, "m", 5, 4, Screen::default());
        assert_eq!(report.accepted, 1);
        assert_eq!(w[0].points.len(), 10);
        assert_eq!(w[0].elim_tick_index, 5);
        assert_eq!(w[0].elim_tick(), 20);
        assert_eq!(w[0].points[0].tick, 15);
        assert_eq!(w[0].points[9].tick, 24);
        assert_eq!(w[0].id(), "m/p/20");
    }

    #[test]
    fn no_elimination_player_is_flagged() {
        let s = stream((0..40).map(|t| tick(t, false)).collect());
        let (w, report) = extract_windows(&s, "m", 5, 4, Screen::default());
        assert!(w.is_empty());
        assert!(report.no_elimination_player);
    }

    #[test]
    fn elimination_too_close_to_stream_end_is_truncated() {
        let n = 4;
        // Elimination at tick 36, stream ends at 39: only n-1 ticks after.
        let s = stream((0..40).map(|t| tick(t, t == 36)).collect());
        let (w, report) = extract_windows(&s, "m", 5, n, Screen::default());
        assert!(w.is_empty());
        assert_eq!(report.rejected, vec![(36, RejectCause::Truncated)]);

        let s = stream((0..40).map(|t| tick(t, t == 3)).collect());
        let (_, report) = extract_windows(&s, "m", 5, n, Screen::default());
        assert_eq!(report.truncated, 1);
    }

    #[test]
    fn duplicated_and_missing_ticks_are_glitches() {
        let mut ticks: Vec<_> = (0..40).map(|t| tick(t, t == 20)).collect();
        ticks.insert(18, tick(17, false));
        let (w, report) = extract_windows(&stream(ticks), "m", 5, 4, Screen::default());
        assert!(w.is_empty());
        assert_eq!(report.glitch_duplicate, 1);

        let ticks: Vec<_> = (0..40).filter(|&t| t != 22).map(|t| tick(t, t == 20)).collect();
        let (w, report) = extract_windows(&stream(ticks), "m", 5, 4, Screen::default());
        assert!(w.is_empty());
        assert_eq!(report.glitch_missing, 1);

        // A glitch outside the window does not matter.
        let ticks: Vec<_> = (0..40).filter(|&t| t != 30).map(|t| tick(t, t == 20)).collect();
        let (w, _) = extract_windows(&stream(ticks), "m", 5, 4, Screen::default());
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn overlapping_eliminations_both_emitted() {
        let s = stream((0..60).map(|t| tick(t, t == 20 || t == 23)).collect());
        let (w, _) = extract_windows(&s, "m", 5, 4, Screen::default());
        assert_eq!(w.len(), 2);
    }

    fn pt(tick: i64, x: f64, y: f64, fired: bool, eliminated: bool) -> ScreenPoint {
        ScreenPoint { tick, x, y, fired, eliminated }
    }

    #[test]
    fn two_point_render_centers_elimination() {
        let pts = [pt(0, 100.0, 100.0, false, false), pt(1, 300.0, 200.0, false, true)];
        let d = render_trajectory(&pts, None, 1920.0, 1080.0);
        assert_eq!(d.segments.len(), 1);
        assert_eq!(d.elimination_marker, Some((960.0, 540.0)));
        assert_eq!(d.segments[0].from, (760.0, 440.0));
        assert!(d.to_svg().contains("class=\"elimination\""));
    }

    #[test]
    fn one_triangle_per_fired_tick() {
        let pts: Vec<_> = (0..8).map(|i| pt(i, i as f64 * 10.0, 5.0, i % 3 == 1, i == 7)).collect();
        let d = render_trajectory(&pts, None, 1920.0, 1080.0);
        assert_eq!(d.fire_markers.len(), 3);
        assert_eq!(d.to_svg().matches("class=\"fire\"").count(), 3);
    }

    #[test]
    fn overlay_color_rank_follows_values() {
        let pts: Vec<_> = (0..7).map(|i| pt(i, i as f64, 0.0, false, i == 6)).collect();
        let values = [0.0, -3.0, 1.0, 0.5, -0.25, 2.0, -1.0];
        let d = render_trajectory(&pts, Some(&values), 1920.0, 1080.0);
        let seg_values = &values[1..];
        for i in 0..seg_values.len() {
            for j in 0..seg_values.len() {
                if seg_values[i] < seg_values[j] {
                    assert!(color_order_key(d.segments[i].rgb) < color_order_key(d.segments[j].rgb));
                }
            }
        }
    }

    #[test]
    fn zero_overlay_is_uniform() {
        let pts: Vec<_> = (0..5).map(|i| pt(i, i as f64, 0.0, false, i == 4)).collect();
        let d = render_trajectory(&pts, Some(&[0.0; 5]), 1920.0, 1080.0);
        assert!(d.segments.iter().all(|s| s.color == "#ffffff"));
    }
}
