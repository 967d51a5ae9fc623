#![allow(dead_code)]

use aimguard_core::features::{FeatureSeries, FeatureTuple};
use aimguard_core::ingest::MatchRecord;
use aimguard_core::inspector::*;
use aimguard_core::nn::LayerConfig;
use aimguard_core::simulator::{gen_dataset, DatasetConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_series(rng: &mut ChaCha8Rng, len: usize) -> FeatureSeries {
    let elim = 1000 + rng.random_range(0..100);
    let tuples = (0..len)
        .map(|i| FeatureTuple {
            t: elim - 63 + i as i64,
            fired: rng.random_bool(0.1),
            eliminated: false,
            v_x: rng.random_range(-20.0..20.0),
            v_y: rng.random_range(-20.0..20.0),
            a_x: rng.random_range(-5.0..5.0),
            a_y: rng.random_range(-5.0..5.0),
            theta: rng.random_range(-3.0..3.0),
        })
        .collect();
    FeatureSeries {
        tuples,
        player_id: "p00".into(),
        match_id: "m00000".into(),
        elim_tick: elim,
    }
}

pub fn tiny_config(seed: u64) -> InspectorConfig {
    InspectorConfig {
        detector_layers: default_detector_layers(8, 8, 8),
        aggregator_layers: vec![
            LayerConfig::Dense { units: 8 },
            LayerConfig::Relu,
            LayerConfig::Dropout { rate: 0.3 },
            LayerConfig::Dense { units: 1 },
            LayerConfig::Sigmoid,
        ],
        detector_training: TrainingConfig {
            epochs: 6,
            samples_per_epoch: Some(6000),
            max_val_samples: Some(1000),
            ..Default::default()
        },
        aggregator_training: TrainingConfig {
            epochs: 30,
            batch_size: 32,
            ..Default::default()
        },
        forest: ForestConfig {
            n_trees: 25,
            ..Default::default()
        },
        background_size: 16,
        seed,
        ..Default::default()
    }
}

pub fn splits(seed: u64, train: usize, val: usize, test: usize) -> (Vec<MatchRecord>, Vec<MatchRecord>, Vec<MatchRecord>) {
    let part = |first, matches| {
        gen_dataset(&DatasetConfig {
            matches,
            first_match: first,
            seed,
            ..Default::default()
        })
        .unwrap()
        .matches
    };
    (part(0, train), part(train, val), part(train + val, test))
}

pub fn tiny_bundle(seed: u64) -> (ModelBundle, Vec<MatchRecord>) {
    let (train, val, test) = splits(77, 16, 4, 3);
    let (bundle, _) = fit(&train, &val, &tiny_config(seed)).unwrap();
    (bundle, test)
}
