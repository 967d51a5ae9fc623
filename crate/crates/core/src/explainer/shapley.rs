use serde::{Deserialize, Serialize};

use super::ExplainerError;

pub const MAX_EXACT_FEATURES: usize = 12;

/// Shapley values of a match-level prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchShapley {
    pub names: Vec<String>,
    pub features: Vec<f64>,
    pub values: Vec<f64>,
    /// Model output with every feature taken from the background vector.
    pub baseline: f64,
    pub prediction: f64,
}

/// Exact Shapley values by enumerating all `2^k` coalitions. Features outside
/// a coalition take their background value.
pub fn exact_shapley(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    background: &[f64],
    names: &[&str],
) -> Result<MatchShapley, ExplainerError> {
    let k = x.len();
    if k > MAX_EXACT_FEATURES {
        return Err(ExplainerError::TooManyFeatures(k));
    }
    if background.len() != k || names.len() != k {
        return Err(ExplainerError::ShapeMismatch {
            expected: vec![k],
            got: vec![background.len(), names.len()],
        });
    }
    let coalitions = 1usize << k;
    let mut value = vec![0.0; coalitions];
    let mut point = vec![0.0; k];
    for (mask, v) in value.iter_mut().enumerate() {
        for j in 0..k {
            point[j] = if mask >> j & 1 == 1 { x[j] } else { background[j] };
        }
        *v = f(&point);
    }
    // weight(s) = s! (k - s - 1)! / k!
    let mut fact = vec![1.0f64; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; k];
    for (mask, &v) in value.iter().enumerate() {
        let s = mask.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                let weight = fact[s] * fact[k - s - 1] / fact[k];
                *p += weight * (value[mask | 1 << j] - v);
            }
        }
    }
    Ok(MatchShapley {
        names: names.iter().map(|s| s.to_string()).collect(),
        features: x.to_vec(),
        values: phi,
        baseline: value[0],
        prediction: value[coalitions - 1],
    })
}
