use serde::{Deserialize, Serialize};

use super::ExplainerError;
use crate::nn::Tensor;

/// Denominator used when folding overlapping subsequence attributions into
/// one value per tick.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezeMode {
    /// 1 at both ends, `i` in the head, `w` in the interior, `L - i` in the tail.
    #[default]
    Verbatim,
    /// The number of subsequences that actually cover tick `i`.
    Coverage,
}

impl std::str::FromStr for SqueezeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verbatim" => Ok(SqueezeMode::Verbatim),
            "coverage" => Ok(SqueezeMode::Coverage),
            other => Err(format!("unknown squeeze mode {other:?}; expected verbatim or coverage")),
        }
    }
}

/// Subsequences of a stride-1 slide that contain 1-based tick `i`.
pub fn coverage(i: usize, len: usize, w: usize) -> usize {
    i.min(w).min(len + 1 - i).min(len + 1 - w)
}

/// Denominator for 1-based tick `i` of a window of `len` ticks.
pub fn denominator(i: usize, len: usize, w: usize, mode: SqueezeMode) -> usize {
    match mode {
        SqueezeMode::Coverage => coverage(i, len, w),
        SqueezeMode::Verbatim => {
            if i == 1 || i == len {
                1
            } else if i <= w {
                i
            } else if i <= len - w {
                w
            } else {
                len - i
            }
        }
    }
}

/// Folds per-subsequence `w x F` attributions into an `L x F` matrix.
///
/// Subsequence `s` (0-based) covers ticks `s + 1 ..= s + w`; its row `r` is
/// attributed to tick `s + r + 1`.
pub fn temporal_squeeze(shap: &[Tensor], len: usize, w: usize, mode: SqueezeMode) -> Result<Tensor, ExplainerError> {
    if w == 0 || len < w || shap.len() != len - w + 1 {
        return Err(ExplainerError::ShapeMismatch {
            expected: vec![len.saturating_sub(w) + 1, w],
            got: vec![shap.len(), w],
        });
    }
    let f = shap[0].cols();
    if let Some(bad) = shap.iter().find(|s| s.shape != [w, f]) {
        return Err(ExplainerError::ShapeMismatch {
            expected: vec![w, f],
            got: bad.shape.clone(),
        });
    }
    let mut sums = vec![0.0; len * f];
    for (s, sp) in shap.iter().enumerate() {
        for r in 0..w {
            let tick = s + r;
            for c in 0..f {
                sums[tick * f + c] += sp.data[r * f + c];
            }
        }
    }
    for i in 1..=len {
        let d = denominator(i, len, w, mode) as f64;
        for c in 0..f {
            sums[(i - 1) * f + c] /= d;
        }
    }
    Ok(Tensor {
        shape: vec![len, f],
        data: sums,
    })
}
