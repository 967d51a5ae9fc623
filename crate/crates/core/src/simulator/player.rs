use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::profile::{BehaviorKind, BehaviorProfile, TickRange};
use crate::ingest::{canonical_angle, PlayerStream, TickRecord};
use crate::trajectory::{xy_to_pitch_yaw, Screen};

/// Crosshair stays this far from the screen border.
const MARGIN: f64 = 120.0;
const PRE_PHASE: TickRange = TickRange::new(80, 120);
const POST_PHASE: TickRange = TickRange::new(48, 80);
/// Ticks a normal player rests before the target appears.
const SETTLE: TickRange = TickRange::new(2, 24);
const TARGET_OFFSET: (f64, f64) = (30.0, 450.0);
const FIRE_INTERVAL: i64 = 6;
/// Engagements never last longer than this, so the approach fits the window.
const MAX_ENGAGEMENT: i64 = 56;
/// Hold tremor is clamped to this many pixels around the rest point.
const TREMOR_CLAMP: f64 = 0.8;

/// Human pursuit controller defaults.
pub const CONTROLLER_GAIN: f64 = 0.12;
pub const CONTROLLER_DAMPING: f64 = 0.6;

/// Ground truth for one generated elimination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub match_id: String,
    pub player_id: String,
    pub kind: BehaviorKind,
    pub label: bool,
    pub elim_tick: i64,
    pub appear_tick: i64,
    /// First tick the crosshair moves toward the target.
    pub pursuit_tick: i64,
    /// Inclusive interval from target appearance to the elimination.
    pub engagement: (i64, i64),
    /// Inclusive interval of the cheat-driven acquisition movement.
    pub snap: Option<(i64, i64)>,
    /// First tick the crosshair is within 10 px of the target.
    pub acquire_tick: Option<i64>,
    pub reaction_delay: u32,
}

#[derive(Clone, Copy, Debug, Default)]
struct Vec2 {
    x: f64,
    y: f64,
}

impl Vec2 {
    fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
    fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn draw(rng: &mut ChaCha8Rng, r: TickRange) -> u32 {
    rng.random_range(r.min..=r.max)
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).expect("finite std").sample(rng)
}

/// Strafing target: piecewise-linear motion with random reversals.
struct Target {
    pos: Vec2,
    vel: Vec2,
}

impl Target {
    fn step(&mut self, rng: &mut ChaCha8Rng, screen: Screen) {
        if rng.random::<f64>() < 0.04 {
            self.vel.x = -self.vel.x;
        }
        if rng.random::<f64>() < 0.02 {
            self.vel.y = -self.vel.y;
        }
        self.pos = self.pos.add(self.vel);
        if self.pos.x < MARGIN || self.pos.x > screen.width - MARGIN {
            self.vel.x = -self.vel.x;
        }
        if self.pos.y < MARGIN || self.pos.y > screen.height - MARGIN {
            self.vel.y = -self.vel.y;
        }
        self.pos = clamp_to_screen(self.pos, screen);
    }
}

fn clamp_to_screen(p: Vec2, screen: Screen) -> Vec2 {
    Vec2::new(
        p.x.clamp(MARGIN, screen.width - MARGIN),
        p.y.clamp(MARGIN, screen.height - MARGIN),
    )
}

struct Recorder<'a> {
    screen: Screen,
    match_id: &'a str,
    player_id: &'a str,
    ticks: Vec<TickRecord>,
}

impl Recorder<'_> {
    fn next_tick(&self) -> i64 {
        self.ticks.len() as i64 + 1
    }

    fn push(&mut self, p: Vec2, fired: bool, hit: bool, eliminated: bool) {
        let p = clamp_to_screen(p, self.screen);
        let (pitch, yaw) =
            xy_to_pitch_yaw(p.x, p.y, self.screen.width, self.screen.height).expect("clamped point is on screen");
        self.ticks.push(TickRecord {
            tick: self.next_tick(),
            pitch: canonical_angle(pitch),
            yaw: canonical_angle(yaw),
            fired,
            eliminated,
            hit: Some(hit),
            player_id: self.player_id.to_string(),
            match_id: self.match_id.to_string(),
        });
    }
}

/// Per-player constants drawn once.
struct Style {
    gain: f64,
    damping: f64,
    hit_prob: f64,
    scan_std: f64,
}

/// Free look while no target is visible: Ornstein-Uhlenbeck velocity.
fn scan(rec: &mut Recorder, rng: &mut ChaCha8Rng, pos: &mut Vec2, vel: &mut Vec2, ticks: u32, style: &Style) {
    for _ in 0..ticks {
        vel.x = 0.85 * vel.x + gauss(rng, style.scan_std);
        vel.y = 0.85 * vel.y + gauss(rng, style.scan_std * 0.5);
        *pos = clamp_to_screen(pos.add(*vel), rec.screen);
        rec.push(*pos, false, false, false);
    }
}

/// Rest on `anchor` with clamped tremor.
fn hold(rec: &mut Recorder, rng: &mut ChaCha8Rng, anchor: Vec2, std: f64, ticks: u32) -> Vec2 {
    let mut p = anchor;
    for _ in 0..ticks {
        p = Vec2::new(
            anchor.x + gauss(rng, std).clamp(-TREMOR_CLAMP, TREMOR_CLAMP),
            anchor.y + gauss(rng, std).clamp(-TREMOR_CLAMP, TREMOR_CLAMP),
        );
        rec.push(p, false, false, false);
    }
    p
}

/// Glide from `from` to `to` over `ticks` with a smoothstep profile.
fn glide(rec: &mut Recorder, from: Vec2, to: Vec2, ticks: u32) -> Vec2 {
    let mut p = from;
    for k in 1..=ticks {
        let s = smoothstep(k as f64 / ticks as f64);
        p = from.add(to.sub(from).scale(s));
        rec.push(p, false, false, false);
    }
    p
}

fn offset_point(rng: &mut ChaCha8Rng, from: Vec2, screen: Screen) -> Vec2 {
    // Retry until the offset lands on screen so the distance range holds.
    for _ in 0..64 {
        let d = rng.random_range(TARGET_OFFSET.0..=TARGET_OFFSET.1);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let p = from.add(Vec2::new(d * a.cos(), 0.6 * d * a.sin()));
        if clamp_to_screen(p, screen).sub(p).norm() == 0.0 {
            return p;
        }
    }
    let c = Vec2::new(screen.width / 2.0, screen.height / 2.0);
    let dir = c.sub(from);
    let n = dir.norm().max(1.0);
    clamp_to_screen(from.add(dir.scale(TARGET_OFFSET.0.max(n.min(TARGET_OFFSET.1)) / n)), screen)
}

/// Generates one player's tick stream containing `n_eliminations` kills.
///
/// Ticks are numbered contiguously from 1 and every elimination leaves at
/// least 64 ticks before and 32 ticks after it.
pub fn gen_player(
    profile: &BehaviorProfile,
    n_eliminations: usize,
    match_id: &str,
    player_id: &str,
    screen: Screen,
    rng: &mut ChaCha8Rng,
) -> (PlayerStream, Vec<ScenarioTruth>) {
    debug_assert!(profile.validate().is_ok());
    let style = Style {
        gain: CONTROLLER_GAIN * rng.random_range(0.8..1.25),
        damping: CONTROLLER_DAMPING * rng.random_range(0.85..1.15),
        hit_prob: rng.random_range(0.35..0.6),
        scan_std: rng.random_range(0.8..1.6),
    };
    let mut rec = Recorder {
        screen,
        match_id,
        player_id,
        ticks: Vec::new(),
    };
    let mut truths = Vec::with_capacity(n_eliminations);
    let mut pos = Vec2::new(
        rng.random_range(MARGIN..screen.width - MARGIN),
        rng.random_range(MARGIN..screen.height - MARGIN),
    );
    let mut vel = Vec2::default();

    for _ in 0..n_eliminations {
        let pre = draw(rng, PRE_PHASE);
        let delay = draw(rng, profile.reaction_delay);
        let hits_needed = rng.random_range(1..=4u32);

        // Approach: decide where the target enters and where the crosshair rests.
        let (entry, rest) = match profile.kind {
            BehaviorKind::Wallhack | BehaviorKind::Hybrid => {
                let hold_ticks = rng.random_range(30..=50u32);
                let move_ticks = rng.random_range(8..=14u32);
                let scan_ticks = pre - hold_ticks - move_ticks;
                scan(&mut rec, rng, &mut pos, &mut vel, scan_ticks, &style);
                let entry = offset_point(rng, pos, screen);
                let slack = if profile.kind == BehaviorKind::Hybrid {
                    rng.random_range(profile.pre_aim_slack * 0.5..=profile.pre_aim_slack)
                } else {
                    rng.random_range(0.0..=profile.pre_aim_slack)
                };
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let rest = clamp_to_screen(entry.add(Vec2::new(slack * a.cos(), slack * a.sin())), screen);
                glide(&mut rec, pos, rest, move_ticks);
                hold(&mut rec, rng, rest, profile.motor_noise, hold_ticks);
                (entry, rest)
            }
            BehaviorKind::Normal | BehaviorKind::Aimbot => {
                let settle = draw(rng, SETTLE);
                scan(&mut rec, rng, &mut pos, &mut vel, pre - settle, &style);
                let rest = pos;
                hold(&mut rec, rng, rest, 0.4, settle);
                (offset_point(rng, rest, screen), rest)
            }
        };

        let speed = rng.random_range(1.0..4.0);
        let heading = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut target = Target {
            pos: entry,
            vel: Vec2::new(heading * speed, rng.random_range(-0.5..0.5)),
        };

        let appear = rec.next_tick();
        let cheat = profile.kind != BehaviorKind::Normal;
        // The smoothing knob blends the cheat command with a human pursuit of the
        // same target, so smoothing = 1 moves exactly like a normal player.
        let blend = if cheat { profile.smoothing } else { 1.0 };
        let human_delay = if cheat {
            draw(rng, BehaviorProfile::normal().reaction_delay)
        } else {
            delay
        };
        let glide_ticks = match profile.kind {
            BehaviorKind::Normal => 0,
            BehaviorKind::Wallhack => draw(rng, profile.snap_time) + 2,
            _ => draw(rng, profile.snap_time),
        };
        let pursuit = appear + if blend < 1.0 { delay.min(human_delay) } else { human_delay } as i64;
        let mut snap: Option<(i64, i64)> =
            (glide_ticks > 0).then(|| (appear + delay as i64, appear + (delay + glide_ticks) as i64 - 1));
        let (hit_prob, fire_radius) = match profile.kind {
            BehaviorKind::Normal => (style.hit_prob, 14.0),
            BehaviorKind::Wallhack => (0.7, 14.0),
            _ => (0.9, 10.0),
        };

        let mut hits = 0u32;
        let mut last_fire = i64::MIN / 2;
        let mut human = rest;
        let mut human_v = Vec2::default();
        let mut bot = rest;
        let mut glide_from = rest;
        let mut c;
        let mut k = 0u32;
        let mut acquire = None;
        let elim_tick = loop {
            let t = rec.next_tick();
            target.step(rng, screen);
            k += 1;
            let tremor = Vec2::new(
                gauss(rng, 0.4).clamp(-TREMOR_CLAMP, TREMOR_CLAMP),
                gauss(rng, 0.4).clamp(-TREMOR_CLAMP, TREMOR_CLAMP),
            );
            if blend > 0.0 {
                if k <= human_delay {
                    human = rest.add(tremor);
                } else {
                    // Second-order pursuit with motor noise; damping below 1 gives overshoot.
                    let noise = if cheat { BehaviorProfile::normal().motor_noise } else { profile.motor_noise };
                    let err = target.pos.sub(human);
                    let w = style.gain.sqrt();
                    let acc = err.scale(style.gain).sub(human_v.scale(2.0 * style.damping * w));
                    human_v = human_v.add(acc).add(Vec2::new(gauss(rng, noise), gauss(rng, noise)));
                    human = human.add(human_v);
                }
            }
            if blend < 1.0 {
                if k <= delay {
                    bot = rest.add(tremor);
                    glide_from = bot;
                } else if k <= delay + glide_ticks {
                    let s = smoothstep((k - delay) as f64 / glide_ticks as f64);
                    bot = glide_from.add(target.pos.sub(glide_from).scale(s));
                    if k == delay + glide_ticks {
                        bot = bot.add(Vec2::new(gauss(rng, profile.motor_noise), gauss(rng, profile.motor_noise)));
                    }
                } else {
                    bot = target
                        .pos
                        .add(Vec2::new(gauss(rng, profile.motor_noise), gauss(rng, profile.motor_noise)));
                }
            }
            c = clamp_to_screen(bot.scale(1.0 - blend).add(human.scale(blend)), screen);

            let dist = target.pos.sub(c).norm();
            if acquire.is_none() && dist < 10.0 {
                acquire = Some(t);
            }
            let forced = t - appear >= MAX_ENGAGEMENT;
            let can_fire = t - last_fire >= FIRE_INTERVAL;
            let mut fired = false;
            let mut hit = false;
            if forced || (can_fire && dist < fire_radius) {
                fired = true;
                last_fire = t;
                hit = forced || rng.random::<f64>() < hit_prob;
            }
            if hit {
                hits += 1;
            }
            let eliminated = hit && (hits >= hits_needed || forced);
            rec.push(c, fired, hit, eliminated);
            if eliminated {
                break t;
            }
        };
        if let Some((s, e)) = snap {
            snap = (s <= elim_tick).then_some((s, e.min(elim_tick)));
        }

        pos = c;
        vel = Vec2::default();
        let post = draw(rng, POST_PHASE);
        scan(&mut rec, rng, &mut pos, &mut vel, post, &style);

        truths.push(ScenarioTruth {
            match_id: match_id.to_string(),
            player_id: player_id.to_string(),
            kind: profile.kind,
            label: profile.kind.is_cheater(),
            elim_tick,
            appear_tick: appear,
            pursuit_tick: pursuit,
            engagement: (appear, elim_tick),
            snap,
            acquire_tick: acquire,
            reaction_delay: delay,
        });
    }

    (
        PlayerStream {
            player_id: player_id.to_string(),
            ticks: rec.ticks,
        },
        truths,
    )
}

/// Euclidean crosshair-to-point distance per tick, for tests and diagnostics.
pub fn tick_positions(stream: &PlayerStream, screen: Screen) -> Vec<(f64, f64)> {
    stream
        .ticks
        .iter()
        .map(|t| crate::trajectory::pitch_yaw_to_xy(t.pitch, t.yaw, screen.width, screen.height).expect("in range"))
        .collect()
}
