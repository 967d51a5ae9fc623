//! Central finite-difference check of analytic parameter gradients.

use serde::{Deserialize, Serialize};

use super::network::{Mode, Network};
use super::tensor::Tensor;
use super::loss::{weighted_bce, weighted_bce_grad};
use super::NnError;

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub max_relative_error: f64,
    /// Worst relative error per named parameter tensor.
    pub per_param: Vec<(String, f64)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Weighted BCE of an eval-mode network over a labeled batch.
pub fn batch_loss(net: &Network, batch: &[(Tensor, f64)], weights: [f64; 2]) -> Result<f64, NnError> {
    let mut preds = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for (x, y) in batch {
        preds.push(net.predict(x)?);
        targets.push(*y);
    }
    weighted_bce(&preds, &targets, weights)
}

/// Analytic gradient of [`batch_loss`] with respect to every parameter.
pub fn batch_gradient(net: &Network, batch: &[(Tensor, f64)], weights: [f64; 2]) -> Result<Vec<f64>, NnError> {
    let mut grads = vec![0.0; net.param_count()];
    for (x, y) in batch {
        let tape = net.forward(x, &mut Mode::Eval)?;
        let d = weighted_bce_grad(tape.scalar(), *y, weights, batch.len());
        let d_out = Tensor {
            shape: tape.output().shape.clone(),
            data: vec![d],
        };
        net.backward(&tape, &d_out, Some(&mut grads))?;
    }
    Ok(grads)
}

/// Compares analytic gradients with central differences of step `epsilon`
/// for every parameter of `net`.
pub fn finite_diff_check(
    net: &Network,
    batch: &[(Tensor, f64)],
    weights: [f64; 2],
    epsilon: f64,
) -> Result<GradCheckReport, NnError> {
    let analytic = batch_gradient(net, batch, weights)?;
    let mut probe = net.clone();
    let mut per_param = Vec::with_capacity(net.params.slots.len());
    let mut max_rel: f64 = 0.0;
    for slot in net.params.slots.clone() {
        let mut worst: f64 = 0.0;
        for i in slot.range() {
            let orig = probe.params.values[i];
            probe.params.values[i] = orig + epsilon;
            let up = batch_loss(&probe, batch, weights)?;
            probe.params.values[i] = orig - epsilon;
            let down = batch_loss(&probe, batch, weights)?;
            probe.params.values[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic[i], numeric));
        }
        max_rel = max_rel.max(worst);
        per_param.push((slot.name.clone(), worst));
    }
    Ok(GradCheckReport {
        epsilon,
        max_relative_error: max_rel,
        per_param,
        checked: net.param_count(),
    })
}
