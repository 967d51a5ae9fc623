//! Labeled synthetic tick logs for normal players and several cheat styles.
//!
//! All motion happens in screen pixels and is converted to view angles on
//! output, rounded to the precision the log format stores.

mod adversarial;
mod dataset;
mod player;
mod profile;

pub use adversarial::{
    default_channels, match_means, match_means_with, select_adversarial, within_tolerance, AdversarialSelection, MatchMeans,
    MeanKind,
};
pub use dataset::{
    gen_dataset, match_name, player_name, player_seed, read_truth, write_dataset, write_truth, Dataset, DatasetConfig,
    SimulatorError, LABELS_FILE, TICKS_FILE, TRUTH_FILE,
};
pub use player::{gen_player, tick_positions, ScenarioTruth, CONTROLLER_DAMPING, CONTROLLER_GAIN};
pub use profile::{BehaviorKind, BehaviorProfile, ProfileMix, TickRange};
