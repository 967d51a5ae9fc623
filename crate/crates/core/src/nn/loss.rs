//! Class-weighted binary cross-entropy.

use super::NnError;

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Balanced class weights `w_y = N / (2 N_y)`, indexed by class. A class
/// absent from `targets` gets weight 1.
pub fn class_weights(targets: &[f64]) -> [f64; 2] {
    let n = targets.len() as f64;
    let pos = targets.iter().filter(|&&y| y >= 0.5).count() as f64;
    let neg = n - pos;
    let w = |count: f64| if count > 0.0 { n / (2.0 * count) } else { 1.0 };
    [w(neg), w(pos)]
}

fn check(p: f64) -> Result<f64, NnError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NnError::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
}

#[inline]
fn weight_of(y: f64, weights: [f64; 2]) -> f64 {
    if y >= 0.5 {
        weights[1]
    } else {
        weights[0]
    }
}

/// `-mean(w_y * (y ln p + (1 - y) ln(1 - p)))`.
pub fn weighted_bce(pred: &[f64], target: &[f64], weights: [f64; 2]) -> Result<f64, NnError> {
    if pred.len() != target.len() {
        return Err(NnError::LengthMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (&p, &y) in pred.iter().zip(target) {
        let p = check(p)?;
        total += weight_of(y, weights) * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    Ok(-total / pred.len() as f64)
}

/// Derivative of one sample's term of [`weighted_bce`] with respect to its
/// probability, for a batch of `batch_len` samples. Zero where the clamp is
/// active.
pub fn weighted_bce_grad(p: f64, y: f64, weights: [f64; 2], batch_len: usize) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return 0.0;
    }
    -weight_of(y, weights) * (y / p - (1.0 - y) / (1.0 - p)) / batch_len as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_have_near_zero_loss() {
        let loss = weighted_bce(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0], [1.0, 1.0]).unwrap();
        assert!(loss < 1e-11, "{loss}");
    }

    #[test]
    fn coin_flip_is_ln2() {
        let y = [1.0, 0.0, 1.0, 0.0];
        let w = class_weights(&y);
        assert_eq!(w, [1.0, 1.0]);
        let loss = weighted_bce(&[0.5; 4], &y, w).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn weighted_case_matches_scalar_recomputation() {
        let p = [0.9, 0.2, 0.35, 0.7, 0.05];
        let y = [1.0, 0.0, 0.0, 0.0, 0.0];
        let w = class_weights(&y);
        // N=5, one positive: w1 = 5/2, w0 = 5/8.
        assert_eq!(w, [0.625, 2.5]);
        let expected = -(2.5 * 0.9f64.ln()
            + 0.625 * (0.8f64.ln() + 0.65f64.ln() + 0.3f64.ln() + 0.95f64.ln()))
            / 5.0;
        let got = weighted_bce(&p, &y, w).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn out_of_range_probability_errors() {
        assert!(matches!(
            weighted_bce(&[1.5], &[1.0], [1.0, 1.0]),
            Err(NnError::ProbabilityOutOfRange(_))
        ));
        assert!(weighted_bce(&[f64::NAN], &[1.0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn grad_matches_finite_difference() {
        let w = [0.7, 1.9];
        for &(p, y) in &[(0.3, 1.0), (0.8, 0.0), (0.55, 1.0)] {
            let eps = 1e-6;
            let f = |q: f64| weighted_bce(&[q], &[y], w).unwrap();
            let fd = (f(p + eps) - f(p - eps)) / (2.0 * eps);
            assert!((fd - weighted_bce_grad(p, y, w, 1)).abs() < 1e-6);
        }
        assert_eq!(weighted_bce_grad(1.0, 1.0, w, 1), 0.0);
    }
}
