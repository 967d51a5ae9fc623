use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExplainerError;
use crate::nn::{Network, Tensor};

/// How background points and path positions are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Independent uniform draws of background point and path position.
    Random,
    /// Background points visited in a shuffled round-robin and path
    /// positions one per equal-width stratum; same expectation, lower variance.
    #[default]
    Stratified,
}

impl std::str::FromStr for Sampling {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Sampling::Random),
            "stratified" => Ok(Sampling::Stratified),
            other => Err(format!("unknown sampling {other:?}; expected random or stratified")),
        }
    }
}

/// Any scalar model with an input gradient.
pub trait Differentiable {
    fn value_and_gradient(&self, x: &Tensor) -> Result<(f64, Tensor), ExplainerError>;
}

impl Differentiable for Network {
    fn value_and_gradient(&self, x: &Tensor) -> Result<(f64, Tensor), ExplainerError> {
        Ok(self.input_gradient(x)?)
    }
}

/// Monte-Carlo expected gradients: the mean over draws `b ~ background`,
/// `alpha ~ U(0, 1)` of `(x - b) * grad f(b + alpha (x - b))`.
pub fn expected_gradients(
    model: &impl Differentiable,
    x: &Tensor,
    background: &[Tensor],
    n_samples: usize,
    sampling: Sampling,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor, ExplainerError> {
    if background.is_empty() {
        return Err(ExplainerError::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.shape != x.shape) {
        return Err(ExplainerError::ShapeMismatch {
            expected: x.shape.clone(),
            got: b.shape.clone(),
        });
    }
    let n = n_samples.max(1);
    let mut acc = vec![0.0; x.len()];
    let mut order: Vec<usize> = (0..background.len()).collect();
    let mut point = Tensor::zeros(x.shape.clone());
    for k in 0..n {
        let (bi, alpha) = match sampling {
            Sampling::Random => (rng.random_range(0..background.len()), rng.random::<f64>()),
            Sampling::Stratified => {
                let r = k % background.len();
                if r == 0 {
                    order.shuffle(rng);
                }
                (order[r], (k as f64 + rng.random::<f64>()) / n as f64)
            }
        };
        let b = &background[bi];
        for ((p, &xi), &bv) in point.data.iter_mut().zip(&x.data).zip(&b.data) {
            *p = bv + alpha * (xi - bv);
        }
        let (_, g) = model.value_and_gradient(&point)?;
        for (((a, &gi), &xi), &bv) in acc.iter_mut().zip(&g.data).zip(&x.data).zip(&b.data) {
            *a += (xi - bv) * gi;
        }
    }
    Ok(Tensor {
        shape: x.shape.clone(),
        data: acc.into_iter().map(|a| a / n as f64).collect(),
    })
}
