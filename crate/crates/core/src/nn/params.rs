use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

/// Location of one named parameter inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named trainable parameters stored contiguously, in registration order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub slots: Vec<ParamSlot>,
    pub values: Vec<f64>,
}

impl ParamSet {
    /// Registers a parameter and returns its offset.
    pub fn register(&mut self, name: impl Into<String>, shape: Vec<usize>) -> usize {
        let offset = self.values.len();
        let slot = ParamSlot {
            name: name.into(),
            shape,
            offset,
        };
        self.values.resize(offset + slot.len(), 0.0);
        self.slots.push(slot);
        offset
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot(&self, name: &str) -> Option<&ParamSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.slot(name).map(|s| &self.values[s.range()])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.slot(name)?.range();
        Some(&mut self.values[range])
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor> {
        let slot = self.slot(name)?;
        Some(Tensor {
            shape: slot.shape.clone(),
            data: self.values[slot.range()].to_vec(),
        })
    }

    /// Fills `name` with Glorot-uniform values.
    pub fn glorot(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        if let Some(values) = self.get_mut(name) {
            for v in values {
                *v = rng.random_range(-limit..=limit);
            }
        }
    }
}
