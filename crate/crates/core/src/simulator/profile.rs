use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorKind {
    Normal,
    Aimbot,
    Wallhack,
    Hybrid,
}

impl BehaviorKind {
    pub fn is_cheater(self) -> bool {
        self != BehaviorKind::Normal
    }
}

/// Inclusive tick range a per-elimination value is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRange {
    pub min: u32,
    pub max: u32,
}

impl TickRange {
    pub const fn new(min: u32, max: u32) -> Self {
        TickRange { min, max }
    }

    pub fn contains(&self, v: u32) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

/// How a simulated player aims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub kind: BehaviorKind,
    /// Ticks between target appearance and the first aiming movement.
    pub reaction_delay: TickRange,
    /// Ticks an unsmoothed aimbot needs to reach the target.
    pub snap_time: TickRange,
    /// Blend toward a human pursuit of the same target: 0 = pure cheat motion,
    /// 1 = moves like a normal player.
    pub smoothing: f64,
    /// Standard deviation of the per-tick motor noise, in pixels.
    pub motor_noise: f64,
    /// Largest distance between a pre-aimed crosshair and the target's entry point.
    pub pre_aim_slack: f64,
}

impl BehaviorProfile {
    pub fn normal() -> Self {
        BehaviorProfile {
            kind: BehaviorKind::Normal,
            reaction_delay: TickRange::new(10, 16),
            snap_time: TickRange::new(1, 3),
            smoothing: 0.0,
            motor_noise: 0.8,
            pre_aim_slack: 0.0,
        }
    }

    /// Blatant aimbot: locks on the tick the target appears.
    pub fn aimbot(smoothing: f64) -> Self {
        BehaviorProfile {
            kind: BehaviorKind::Aimbot,
            reaction_delay: TickRange::new(0, 0),
            snap_time: TickRange::new(1, 3),
            smoothing: smoothing.clamp(0.0, 1.0),
            motor_noise: 0.3,
            pre_aim_slack: 0.0,
        }
    }

    /// Aimbot tuned to look human: half-blended motion and a human reaction time.
    pub fn mimic() -> Self {
        BehaviorProfile {
            reaction_delay: TickRange::new(7, 12),
            motor_noise: 0.6,
            ..BehaviorProfile::aimbot(0.55)
        }
    }

    pub fn wallhack() -> Self {
        BehaviorProfile {
            kind: BehaviorKind::Wallhack,
            reaction_delay: TickRange::new(2, 5),
            snap_time: TickRange::new(1, 3),
            smoothing: 0.0,
            motor_noise: 0.4,
            pre_aim_slack: 12.0,
        }
    }

    /// Wallhack pre-aim combined with an aimbot snap over a short distance.
    pub fn hybrid() -> Self {
        BehaviorProfile {
            kind: BehaviorKind::Hybrid,
            reaction_delay: TickRange::new(0, 1),
            snap_time: TickRange::new(1, 3),
            smoothing: 0.0,
            motor_noise: 0.3,
            pre_aim_slack: 80.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.reaction_delay.min > self.reaction_delay.max || self.snap_time.min > self.snap_time.max {
            return Err("tick range with min > max".into());
        }
        if self.snap_time.min == 0 {
            return Err("snap_time must be at least one tick".into());
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(format!("smoothing {} outside [0, 1]", self.smoothing));
        }
        if !(self.motor_noise >= 0.0) || !(self.pre_aim_slack >= 0.0) {
            return Err("noise and slack must be non-negative".into());
        }
        Ok(())
    }
}

/// Relative frequency of each cheat profile among cheaters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileMix {
    pub aimbot: f64,
    pub wallhack: f64,
    pub hybrid: f64,
    pub mimic: f64,
}

impl ProfileMix {
    pub fn blatant() -> Self {
        ProfileMix {
            aimbot: 0.4,
            wallhack: 0.3,
            hybrid: 0.3,
            mimic: 0.0,
        }
    }

    pub fn mimic_only() -> Self {
        ProfileMix {
            aimbot: 0.0,
            wallhack: 0.0,
            hybrid: 0.0,
            mimic: 1.0,
        }
    }

    /// Picks a profile given a uniform draw in `[0, 1)`.
    pub fn pick(&self, u: f64) -> BehaviorProfile {
        let total = self.aimbot + self.wallhack + self.hybrid + self.mimic;
        let mut x = u * total;
        let options = [
            (self.aimbot, BehaviorProfile::aimbot(0.0)),
            (self.wallhack, BehaviorProfile::wallhack()),
            (self.hybrid, BehaviorProfile::hybrid()),
            (self.mimic, BehaviorProfile::mimic()),
        ];
        for (w, profile) in options.iter() {
            if x < *w {
                return profile.clone();
            }
            x -= w;
        }
        options
            .iter()
            .rev()
            .find(|(w, _)| *w > 0.0)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(|| BehaviorProfile::aimbot(0.0))
    }
}

impl std::str::FromStr for ProfileMix {
    type Err = String;

    /// `blatant`, `mimic`, or `aimbot=0.4,wallhack=0.3,hybrid=0.3,mimic=0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
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
            let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=weight, got {part:?}"))?;
            let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
            if !(v >= 0.0) {
                return Err(format!("{k}: negative weight"));
            }
            match k.trim() {
                "aimbot" => mix.aimbot = v,
                "wallhack" => mix.wallhack = v,
                "hybrid" => mix.hybrid = v,
                "mimic" => mix.mimic = v,
                other => return Err(format!("unknown profile {other:?}")),
            }
        }
        if mix.aimbot + mix.wallhack + mix.hybrid + mix.mimic <= 0.0 {
            return Err("profile mix has no positive weight".into());
        }
        Ok(mix)
    }
}
