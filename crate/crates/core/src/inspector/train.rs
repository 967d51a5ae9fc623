use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::InspectorError;
use crate::nn::loss::{class_weights, weighted_bce, weighted_bce_grad};
use crate::nn::{Adam, Mode, Network, Tensor};
use crate::seeds::stream_seed;

/// Labeled samples produced on demand.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn input(&self, i: usize) -> Tensor;
    fn label(&self, i: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for [(Tensor, f64)] {
    fn len(&self) -> usize {
        <[(Tensor, f64)]>::len(self)
    }
    fn input(&self, i: usize) -> Tensor {
        self[i].0.clone()
    }
    fn label(&self, i: usize) -> f64 {
        self[i].1
    }
}

impl SampleSource for Vec<(Tensor, f64)> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn input(&self, i: usize) -> Tensor {
        self[i].0.clone()
    }
    fn label(&self, i: usize) -> f64 {
        self[i].1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
    pub class_weighting: bool,
    pub seed: u64,
    /// Random subset of training samples visited per epoch; all when unset.
    pub samples_per_epoch: Option<usize>,
    /// Fixed random subset of validation samples; all when unset.
    pub max_val_samples: Option<usize>,
    /// Samples per gradient chunk. Chunks may run on different threads but are
    /// always reduced in the same order, so results do not depend on thread count.
    pub chunk_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 500,
            batch_size: 256,
            lr: 1e-3,
            plateau_factor: 0.5,
            plateau_patience: 20,
            min_lr: 1e-4,
            early_stop_patience: 50,
            class_weighting: true,
            seed: 0,
            samples_per_epoch: None,
            max_val_samples: None,
            chunk_size: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrChange {
    pub epoch: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub lr_changes: Vec<LrChange>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Last epoch that ran (1-based).
    pub stopped_epoch: usize,
    pub early_stopped: bool,
}

/// Mean weighted loss of `net` over `indices`, evaluation mode.
pub fn evaluate(
    net: &Network,
    data: &(impl SampleSource + ?Sized),
    indices: &[usize],
    weights: [f64; 2],
) -> Result<f64, InspectorError> {
    let preds: Result<Vec<f64>, _> = indices.par_iter().map(|&i| net.predict(&data.input(i))).collect();
    let targets: Vec<f64> = indices.iter().map(|&i| data.label(i)).collect();
    Ok(weighted_bce(&preds?, &targets, weights)?)
}

fn batch_step(
    net: &Network,
    data: &(impl SampleSource + ?Sized),
    batch: &[(usize, u64)],
    weights: [f64; 2],
    chunk_size: usize,
) -> Result<(f64, Vec<f64>), InspectorError> {
    let n = batch.len();
    let parts: Result<Vec<(f64, Vec<f64>)>, InspectorError> = batch
        .par_chunks(chunk_size.max(1))
        .map(|chunk| {
            let mut grads = vec![0.0; net.param_count()];
            let mut loss = 0.0;
            for &(i, sample_seed) in chunk {
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
                let tape = net.forward(&data.input(i), &mut Mode::Train(&mut rng))?;
                let (p, y) = (tape.scalar(), data.label(i));
                loss += weighted_bce(&[p], &[y], weights)?;
                let d_out = Tensor {
                    shape: tape.output().shape.clone(),
                    data: vec![weighted_bce_grad(p, y, weights, n)],
                };
                net.backward(&tape, &d_out, Some(&mut grads))?;
            }
            Ok((loss, grads))
        })
        .collect();
    let mut total = vec![0.0; net.param_count()];
    let mut loss = 0.0;
    for (l, g) in parts? {
        loss += l;
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    Ok((loss / n as f64, total))
}

/// Mini-batch Adam with plateau learning-rate reduction, early stopping and
/// restoration of the parameters with the lowest validation loss.
pub fn train_network(
    net: &mut Network,
    train: &(impl SampleSource + ?Sized),
    val: &(impl SampleSource + ?Sized),
    config: &TrainingConfig,
) -> Result<(History, Adam), InspectorError> {
    let labels: Vec<f64> = (0..train.len()).map(|i| train.label(i)).collect();
    if !labels.iter().any(|&y| y >= 0.5) || !labels.iter().any(|&y| y < 0.5) {
        return Err(InspectorError::SingleClassTrainingSet);
    }
    let weights = if config.class_weighting {
        class_weights(&labels)
    } else {
        [1.0, 1.0]
    };

    let mut val_idx: Vec<usize> = (0..val.len()).collect();
    if let Some(k) = config.max_val_samples.filter(|&k| k < val.len()) {
        val_idx.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &[1])));
        val_idx.truncate(k);
        val_idx.sort_unstable();
    }

    let mut adam = Adam::new(net.param_count(), config.lr);
    let mut history = History {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best_params = net.params.values.clone();
    let mut since_best = 0usize;
    let mut plateau_wait = 0usize;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &[2, epoch as u64])));
        if let Some(k) = config.samples_per_epoch {
            order.truncate(k.max(1));
        }
        let tagged: Vec<(usize, u64)> = order
            .iter()
            .enumerate()
            .map(|(pos, &i)| (i, stream_seed(config.seed, &[3, epoch as u64, pos as u64])))
            .collect();
        let mut train_loss = 0.0;
        let mut batches = 0usize;
        for batch in tagged.chunks(config.batch_size.max(1)) {
            let (loss, grads) = batch_step(net, train, batch, weights, config.chunk_size)?;
            adam.step(&mut net.params.values, &grads);
            train_loss += loss;
            batches += 1;
        }
        let train_loss = train_loss / batches.max(1) as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            evaluate(net, val, &val_idx, weights)?
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: adam.lr,
        });
        history.stopped_epoch = epoch;

        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best_params.clone_from(&net.params.values);
            since_best = 0;
            plateau_wait = 0;
        } else {
            since_best += 1;
            plateau_wait += 1;
            if plateau_wait >= config.plateau_patience {
                let to = (adam.lr * config.plateau_factor).max(config.min_lr);
                if to < adam.lr {
                    history.lr_changes.push(LrChange {
                        epoch,
                        from: adam.lr,
                        to,
                    });
                    adam.lr = to;
                }
                plateau_wait = 0;
            }
            if since_best >= config.early_stop_patience {
                history.early_stopped = true;
                break;
            }
        }
    }
    net.params.values = best_params;
    Ok((history, adam))
}
