//! Kinematic features of an aiming trajectory.
//!
//! Each retained tick carries `[t, I_f, I_e, v_x, v_y, a_x, a_y, theta]`:
//! backward differences of screen position (velocity), of velocity
//! (acceleration), and the signed change in velocity heading. Time is measured
//! in ticks, so every difference has `dt = 1`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::RawWindow;

/// Number of channels in a feature tuple.
pub const FEATURE_COUNT: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["t", "I_f", "I_e", "v_x", "v_y", "a_x", "a_y", "theta"];

/// Channels carrying trajectory kinematics (everything except time and flags).
pub const KINEMATIC_CHANNELS: [usize; 5] = [3, 4, 5, 6, 7];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window has {got} points, need at least 2 consecutive ticks")]
    WindowTooShort { got: usize },
    #[error("window ticks are not consecutive at index {index}")]
    NonConsecutive { index: usize },
    #[error("no tuples matched the requested slice")]
    EmptySlice,
    #[error("line {line}: malformed feature row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTuple {
    pub t: i64,
    pub fired: bool,
    pub eliminated: bool,
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    /// Radians per tick, in `(-pi, pi]`.
    pub theta: f64,
}

impl FeatureTuple {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.t as f64,
            f64::from(u8::from(self.fired)),
            f64::from(u8::from(self.eliminated)),
            self.v_x,
            self.v_y,
            self.a_x,
            self.a_y,
            self.theta,
        ]
    }

    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    pub fn accel_magnitude(&self) -> f64 {
        self.a_x.hypot(self.a_y)
    }
}

/// The `m + n` feature tuples of one elimination window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub tuples: Vec<FeatureTuple>,
    pub player_id: String,
    pub match_id: String,
    pub elim_tick: i64,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn id(&self) -> String {
        crate::trajectory::elimination_id(&self.match_id, &self.player_id, self.elim_tick)
    }
}

/// Heading of a velocity vector; a motionless crosshair has heading 0.
pub fn heading(v_x: f64, v_y: f64) -> f64 {
    if v_x == 0.0 && v_y == 0.0 {
        0.0
    } else {
        v_y.atan2(v_x)
    }
}

/// Shortest signed angle, wrapped into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut d = a % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

pub fn compute_features(window: &RawWindow) -> Result<FeatureSeries, FeatureError> {
    let pts = &window.points;
    if pts.len() < 2 {
        return Err(FeatureError::WindowTooShort { got: pts.len() });
    }
    if let Some(index) = pts.windows(2).position(|p| p[1].tick != p[0].tick + 1) {
        return Err(FeatureError::NonConsecutive { index });
    }

    let mut tuples = Vec::with_capacity(pts.len() - 1);
    let mut prev: Option<(f64, f64, f64)> = None;
    for pair in pts.windows(2) {
        let (p0, p1) = (&pair[0], &pair[1]);
        let v_x = p1.x - p0.x;
        let v_y = p1.y - p0.y;
        let alpha = heading(v_x, v_y);
        let (a_x, a_y, theta) = match prev {
            Some((pv_x, pv_y, p_alpha)) => (v_x - pv_x, v_y - pv_y, wrap_angle(alpha - p_alpha)),
            None => (0.0, 0.0, 0.0),
        };
        tuples.push(FeatureTuple {
            t: p1.tick,
            fired: p1.fired,
            eliminated: p1.eliminated,
            v_x,
            v_y,
            a_x,
            a_y,
            theta,
        });
        prev = Some((v_x, v_y, alpha));
    }
    Ok(FeatureSeries {
        tuples,
        player_id: window.player_id.clone(),
        match_id: window.match_id.clone(),
        elim_tick: window.elim_tick(),
    })
}

/// Per-channel arithmetic mean over every tuple of every series that `keep`
/// accepts.
pub fn feature_means<'a, I, F>(series: I, keep: F) -> Result<[f64; FEATURE_COUNT], FeatureError>
where
    I: IntoIterator<Item = &'a FeatureSeries>,
    F: Fn(&FeatureSeries) -> bool,
{
    let mut sums = [0.0; FEATURE_COUNT];
    let mut count = 0usize;
    for s in series.into_iter().filter(|s| keep(s)) {
        for t in &s.tuples {
            for (acc, v) in sums.iter_mut().zip(t.to_array()) {
                *acc += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(FeatureError::EmptySlice);
    }
    Ok(sums.map(|s| s / count as f64))
}

const DUMP_HEADER: [&str; 11] = [
    "t", "I_f", "I_e", "v_x", "v_y", "a_x", "a_y", "theta", "player_id", "match_id", "elim_tick",
];

/// Writes a feature dump; floats use the shortest exact representation.
pub fn write_feature_dump<W: Write>(series: &[FeatureSeries], sink: W) -> Result<(), FeatureError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(DUMP_HEADER)?;
    for s in series {
        for t in &s.tuples {
            w.write_record([
                t.t.to_string(),
                u8::from(t.fired).to_string(),
                u8::from(t.eliminated).to_string(),
                t.v_x.to_string(),
                t.v_y.to_string(),
                t.a_x.to_string(),
                t.a_y.to_string(),
                t.theta.to_string(),
                s.player_id.clone(),
                s.match_id.clone(),
                s.elim_tick.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature dump. A header naming the angle column `theta_deg` marks
/// angular change in degrees; it is converted to radians.
pub fn read_feature_dump<R: Read>(source: R) -> Result<Vec<FeatureSeries>, FeatureError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let degrees = match header.get(7).map(String::as_str) {
        Some("theta") => false,
        Some("theta_deg") => true,
        _ => {
            return Err(FeatureError::MalformedRow {
                line: 1,
                reason: format!("unexpected header {header:?}"),
            })
        }
    };
    let mut out: Vec<FeatureSeries> = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let line = idx + 2;
        let rec = rec?;
        let bad = |reason: String| FeatureError::MalformedRow { line, reason };
        if rec.len() != DUMP_HEADER.len() {
            return Err(bad(format!("expected {} columns", DUMP_HEADER.len())));
        }
        let f = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| bad(format!("{}: {e}", DUMP_HEADER[i])));
        let int = |i: usize| rec[i].trim().parse::<i64>().map_err(|e| bad(format!("{}: {e}", DUMP_HEADER[i])));
        let flag = |i: usize| match rec[i].trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(bad(format!("{}: bad flag {other:?}", DUMP_HEADER[i]))),
        };
        let mut theta = f(7)?;
        if degrees {
            theta = theta.to_radians();
        }
        let tuple = FeatureTuple {
            t: int(0)?,
            fired: flag(1)?,
            eliminated: flag(2)?,
            v_x: f(3)?,
            v_y: f(4)?,
            a_x: f(5)?,
            a_y: f(6)?,
            theta,
        };
        let (player, m, elim) = (&rec[8], &rec[9], int(10)?);
        match out.last_mut() {
            Some(s) if s.player_id == player && s.match_id == m && s.elim_tick == elim => s.tuples.push(tuple),
            _ => out.push(FeatureSeries {
                tuples: vec![tuple],
                player_id: player.to_string(),
                match_id: m.to_string(),
                elim_tick: elim,
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::ScreenPoint;

    fn window(coords: &[(f64, f64)]) -> RawWindow {
        RawWindow {
            points: coords
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| ScreenPoint {
                    tick: i as i64,
                    x,
                    y,
                    fired: false,
                    eliminated: i + 1 == coords.len(),
                })
                .collect(),
            elim_tick_index: coords.len() - 1,
            player_id: "p".into(),
            match_id: "m".into(),
        }
    }

    #[test]
    fn constant_velocity_has_no_acceleration_or_turn() {
        let s = compute_features(&window(&[(0.0, 0.0), (3.0, 4.0), (6.0, 8.0)])).unwrap();
        assert_eq!(s.len(), 2);
        for (t, tuple) in [1, 2].iter().zip(&s.tuples) {
            assert_eq!(tuple.t, *t);
            assert_eq!((tuple.v_x, tuple.v_y), (3.0, 4.0));
            assert_eq!((tuple.a_x, tuple.a_y, tuple.theta), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn quarter_turn() {
        let s = compute_features(&window(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])).unwrap();
        assert!((s.tuples[1].theta - PI / 2.0).abs() < 1e-15);
        assert_eq!((s.tuples[1].a_x, s.tuples[1].a_y), (-1.0, 1.0));
    }

    #[test]
    fn stillness_is_all_zero() {
        let s = compute_features(&window(&[(5.0, 5.0); 4])).unwrap();
        for t in &s.tuples {
            assert_eq!([t.v_x, t.v_y, t.a_x, t.a_y, t.theta], [0.0; 5]);
        }
    }

    #[test]
    fn wrap_prefers_short_turns() {
        assert!((wrap_angle(359f64.to_radians()) + 1f64.to_radians()).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        // Reversal from heading pi to -pi/2.
        let s = compute_features(&window(&[(2.0, 0.0), (1.0, 0.0), (1.0, -1.0)])).unwrap();
        assert!((s.tuples[1].theta - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_or_gapped_windows_error() {
        assert!(matches!(
            compute_features(&window(&[(0.0, 0.0)])),
            Err(FeatureError::WindowTooShort { got: 1 })
        ));
        let mut w = window(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        w.points[2].tick = 5;
        assert!(matches!(compute_features(&w), Err(FeatureError::NonConsecutive { index: 1 })));
    }

    #[test]
    fn means_of_simple_slices() {
        let s = compute_features(&window(&[(0.0, 0.0), (2.0, 0.0)])).unwrap();
        let m = feature_means([&s], |_| true).unwrap();
        assert_eq!(m, s.tuples[0].to_array());

        let s2 = compute_features(&window(&[(0.0, 0.0), (4.0, 0.0)])).unwrap();
        let m = feature_means([&s, &s2], |_| true).unwrap();
        assert_eq!(m[3], 3.0);
        assert!(matches!(feature_means([&s], |_| false), Err(FeatureError::EmptySlice)));
    }

    #[test]
    fn dump_round_trip_and_degree_import() {
        let s = compute_features(&window(&[(0.0, 0.0), (1.0, 0.3), (0.7, 2.0), (0.1, 0.1)])).unwrap();
        let mut buf = Vec::new();
        write_feature_dump(std::slice::from_ref(&s), &mut buf).unwrap();
        let back = read_feature_dump(buf.as_slice()).unwrap();
        assert_eq!(back, vec![s.clone()]);

        let text = String::from_utf8(buf).unwrap().replacen("theta", "theta_deg", 1);
        let text = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 0 {
                    return l.to_string();
                }
                let mut cols: Vec<String> = l.split(',').map(str::to_string).collect();
                let rad: f64 = cols[7].parse().unwrap();
                cols[7] = rad.to_degrees().to_string();
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n");
        let back = read_feature_dump(text.as_bytes()).unwrap();
        for (a, b) in back[0].tuples.iter().zip(&s.tuples) {
            assert!((a.theta - b.theta).abs() < 1e-12);
        }
    }
}
