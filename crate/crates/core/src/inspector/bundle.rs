use serde::{Deserialize, Serialize};

use super::forest::ForestModel;
use super::match_vector::MatchMode;
use super::train::History;
use super::window::Normalizer;
use super::InspectorError;
use crate::nn::checkpoint::b64;
use crate::nn::{Adam, Network, NetworkConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(with = "b64")]
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    #[serde(with = "b64")]
    pub m: Vec<f64>,
    #[serde(with = "b64")]
    pub v: Vec<f64>,
}

impl From<&Adam> for OptimizerState {
    fn from(a: &Adam) -> Self {
        OptimizerState {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            step: a.step,
            m: a.m.clone(),
            v: a.v.clone(),
        }
    }
}

impl From<&OptimizerState> for Adam {
    fn from(s: &OptimizerState) -> Self {
        Adam {
            lr: s.lr,
            beta1: s.beta1,
            beta2: s.beta2,
            eps: s.eps,
            step: s.step,
            m: s.m.clone(),
            v: s.v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub architecture: NetworkConfig,
    pub params: Vec<NamedArray>,
    pub optimizer: Option<OptimizerState>,
}

impl NetworkCheckpoint {
    pub fn capture(net: &Network, optimizer: Option<&Adam>) -> Self {
        let params = net
            .params
            .slots
            .iter()
            .map(|s| NamedArray {
                name: s.name.clone(),
                shape: s.shape.clone(),
                data: net.params.values[s.range()].to_vec(),
            })
            .collect();
        NetworkCheckpoint {
            architecture: net.config.clone(),
            params,
            optimizer: optimizer.map(OptimizerState::from),
        }
    }

    pub fn restore(&self) -> Result<Network, InspectorError> {
        let mut net = Network::build(self.architecture.clone())?;
        if self.params.len() != net.params.slots.len() {
            return Err(InspectorError::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                net.params.slots.len(),
                self.params.len()
            )));
        }
        for arr in &self.params {
            let slot = net
                .params
                .slot(&arr.name)
                .ok_or_else(|| InspectorError::Checkpoint(format!("unknown parameter {}", arr.name)))?
                .clone();
            if slot.shape != arr.shape || slot.len() != arr.data.len() {
                return Err(InspectorError::Checkpoint(format!(
                    "parameter {} has shape {:?}, architecture needs {:?}",
                    arr.name, arr.shape, slot.shape
                )));
            }
            net.params.values[slot.range()].copy_from_slice(&arr.data);
        }
        Ok(net)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub m: usize,
    pub n: usize,
    pub w: usize,
}

impl WindowConfig {
    pub fn len(&self) -> usize {
        self.m + self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subsequences(&self) -> usize {
        self.len() + 1 - self.w
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            m: crate::trajectory::DEFAULT_M,
            n: crate::trajectory::DEFAULT_N,
            w: super::window::DEFAULT_W,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistories {
    pub detector: History,
    pub aggregator: History,
}

/// Everything inference and explanation need, in one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub window: WindowConfig,
    pub mode: MatchMode,
    pub normalization: Normalizer,
    pub detector: NetworkCheckpoint,
    pub aggregator: NetworkCheckpoint,
    pub best_threshold: f64,
    pub threshold_degenerate: bool,
    pub forest: ForestModel,
    /// Forest probability at or above which a player is flagged.
    pub verdict_cut: f64,
    /// Normalized training subsequences used as the attribution baseline.
    pub background: Vec<NamedArray>,
    /// Column means of the forest's training rows; the match-level baseline.
    pub match_background: Vec<f64>,
    pub history: TrainingHistories,
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String, InspectorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, InspectorError> {
        let b: ModelBundle = serde_json::from_str(text)?;
        if b.format_version != FORMAT_VERSION {
            return Err(InspectorError::Checkpoint(format!(
                "unsupported format_version {}",
                b.format_version
            )));
        }
        Ok(b)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), InspectorError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InspectorError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Short content hash identifying the trained parameters.
    pub fn model_version(&self) -> String {
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        for arr in self.detector.params.iter().chain(&self.aggregator.params) {
            for v in &arr.data {
                for b in v.to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01B3);
                }
            }
        }
        format!("{h:016x}")
    }
}
