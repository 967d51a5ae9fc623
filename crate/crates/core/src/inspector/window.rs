use serde::{Deserialize, Serialize};

use super::InspectorError;
use crate::features::{FeatureSeries, FEATURE_COUNT};
use crate::nn::Tensor;

pub const DEFAULT_W: usize = 6;

/// Stride-1 (or coarser) length-`w` slices of one feature series.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsequenceBatch {
    pub w: usize,
    pub stride: usize,
    /// Offset of each subsequence's first row within the series.
    pub offsets: Vec<usize>,
    pub windows: Vec<Tensor>,
}

impl SubsequenceBatch {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Number of stride-1 subsequences of a series of length `len`.
pub fn subsequence_count(len: usize, w: usize) -> usize {
    if len < w || w == 0 {
        0
    } else {
        len - w + 1
    }
}

/// Slices an already normalized `len x F` matrix.
pub fn slide_matrix(matrix: &Tensor, w: usize, stride: usize) -> Result<SubsequenceBatch, InspectorError> {
    let (len, f) = (matrix.rows(), matrix.cols());
    if w == 0 || len < w {
        return Err(InspectorError::SeriesShorterThanWindow { len, w });
    }
    let stride = stride.max(1);
    let offsets: Vec<usize> = (0..=len - w).step_by(stride).collect();
    let windows = offsets
        .iter()
        .map(|&o| Tensor {
            shape: vec![w, f],
            data: matrix.data[o * f..(o + w) * f].to_vec(),
        })
        .collect();
    Ok(SubsequenceBatch {
        w,
        stride,
        offsets,
        windows,
    })
}

/// `batch[i] = tuples[i .. i + w)`, raw feature values.
pub fn slide(series: &FeatureSeries, w: usize, stride: usize) -> Result<SubsequenceBatch, InspectorError> {
    let data: Vec<f64> = series.tuples.iter().flat_map(|t| t.to_array()).collect();
    let m = Tensor {
        shape: vec![series.len(), FEATURE_COUNT],
        data,
    };
    slide_matrix(&m, w, stride)
}

/// Per-channel standardization fitted on training tuples.
///
/// The time channel is first re-expressed relative to the elimination tick
/// and scaled by the window length, so absolute match time never reaches the
/// model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub window_len: usize,
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
}

impl Normalizer {
    fn relative(series: &FeatureSeries, window_len: usize) -> impl Iterator<Item = [f64; FEATURE_COUNT]> + '_ {
        let scale = window_len.max(1) as f64;
        series.tuples.iter().map(move |t| {
            let mut a = t.to_array();
            a[0] = (t.t - series.elim_tick) as f64 / scale;
            a
        })
    }

    pub fn fit<'a>(series: impl IntoIterator<Item = &'a FeatureSeries>, window_len: usize) -> Self {
        let mut sum = [0.0; FEATURE_COUNT];
        let mut sq = [0.0; FEATURE_COUNT];
        let mut n = 0.0;
        let all: Vec<&FeatureSeries> = series.into_iter().collect();
        for s in &all {
            for a in Self::relative(s, window_len) {
                for c in 0..FEATURE_COUNT {
                    sum[c] += a[c];
                }
                n += 1.0;
            }
        }
        let mean = if n > 0.0 { sum.map(|s| s / n) } else { [0.0; FEATURE_COUNT] };
        for s in &all {
            for a in Self::relative(s, window_len) {
                for c in 0..FEATURE_COUNT {
                    sq[c] += (a[c] - mean[c]).powi(2);
                }
            }
        }
        let std = sq.map(|q| {
            let sd = if n > 0.0 { (q / n).sqrt() } else { 0.0 };
            if sd > 1e-9 {
                sd
            } else {
                1.0
            }
        });
        Normalizer { window_len, mean, std }
    }

    pub fn identity(window_len: usize) -> Self {
        Normalizer {
            window_len,
            mean: [0.0; FEATURE_COUNT],
            std: [1.0; FEATURE_COUNT],
        }
    }

    /// `len x F` matrix of standardized features.
    pub fn transform(&self, series: &FeatureSeries) -> Tensor {
        let mut data = Vec::with_capacity(series.len() * FEATURE_COUNT);
        for a in Self::relative(series, self.window_len) {
            for c in 0..FEATURE_COUNT {
                data.push((a[c] - self.mean[c]) / self.std[c]);
            }
        }
        Tensor {
            shape: vec![series.len(), FEATURE_COUNT],
            data,
        }
    }
}
