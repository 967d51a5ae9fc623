mod common;

use aimguard_core::explainer::*;
use aimguard_core::features::{compute_features, FEATURE_COUNT};
use aimguard_core::inspector::*;
use aimguard_core::nn::{sigmoid, Tensor};
use aimguard_core::simulator::{gen_player, BehaviorProfile};
use aimguard_core::trajectory::{extract_windows, Screen};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Linear(Vec<f64>);

impl Differentiable for Linear {
    fn value_and_gradient(&self, x: &Tensor) -> Result<(f64, Tensor), ExplainerError> {
        let v = x.data.iter().zip(&self.0).map(|(a, c)| a * c).sum();
        Ok((v, Tensor { shape: x.shape.clone(), data: self.0.clone() }))
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn linear_case(seed: u64) -> (Linear, Tensor, Vec<Tensor>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..12).map(|_| rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let x = random_tensor(&mut rng, 3, 4, 3.0, 6.0);
    let bg: Vec<Tensor> = (0..20).map(|_| random_tensor(&mut rng, 3, 4, -1.0, 1.0)).collect();
    let oracle = (0..12)
        .map(|j| {
            let mean_b = bg.iter().map(|b| b.data[j]).sum::<f64>() / bg.len() as f64;
            c[j] * (x.data[j] - mean_b)
        })
        .collect();
    (Linear(c), x, bg, oracle)
}

#[test]
fn linear_model_matches_closed_form() {
    let (model, x, bg, oracle) = linear_case(1);
    for sampling in [Sampling::Random, Sampling::Stratified] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = expected_gradients(&model, &x, &bg, 5000, sampling, &mut rng).unwrap();
        for (got, want) in a.data.iter().zip(&oracle) {
            assert!((got - want).abs() <= 0.02 * want.abs(), "{sampling:?}: {got} vs {want}");
        }
    }
}

#[test]
fn estimator_variance_falls_as_one_over_n() {
    let (model, x, bg, oracle) = linear_case(3);
    let mse = |n: usize| {
        let reps = 300;
        let mut total = 0.0;
        for r in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + r);
            let a = expected_gradients(&model, &x, &bg, n, Sampling::Random, &mut rng).unwrap();
            total += a.data.iter().zip(&oracle).map(|(g, w)| (g - w).powi(2)).sum::<f64>();
        }
        total / reps as f64
    };
    let slope = (mse(160) / mse(10)).ln() / 16f64.ln();
    assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn input_equal_to_background_gets_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&mut rng, 6, 8, -1.0, 1.0);
    let (bundle, _) = tiny_bundle(1);
    let det = Detector::from_bundle(&bundle).unwrap();
    let a = expected_gradients(&det.detector, &x, std::slice::from_ref(&x), 50, Sampling::Random, &mut rng).unwrap();
    assert!(a.data.iter().all(|&v| v == 0.0));
}

#[test]
fn bad_backgrounds_are_rejected() {
    let (model, x, _, _) = linear_case(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(matches!(
        expected_gradients(&model, &x, &[], 10, Sampling::Random, &mut rng),
        Err(ExplainerError::EmptyBackground)
    ));
    assert!(matches!(
        expected_gradients(&model, &x, &[Tensor::zeros(vec![2, 4])], 10, Sampling::Random, &mut rng),
        Err(ExplainerError::ShapeMismatch { .. })
    ));
}

#[test]
fn attributions_are_complete_on_the_tiny_detector() {
    let (bundle, test) = tiny_bundle(2);
    let det = Detector::from_bundle(&bundle).unwrap();
    assert!(det.detector.param_count() <= 2000);
    let bg = background_tensors(&bundle);
    let mean_bg = bg.iter().map(|b| det.detector.predict(b).unwrap()).sum::<f64>() / bg.len() as f64;
    let (series, _) = prepare(&test, bundle.window);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for l in &series {
        let batch = slide_matrix(&det.normalizer.transform(&l.series), 6, 1).unwrap();
        for x in batch.windows.iter().step_by(13) {
            let gap = det.detector.predict(x).unwrap() - mean_bg;
            if gap.abs() < 0.1 {
                continue;
            }
            let a = expected_gradients(&det.detector, x, &bg, 2000, Sampling::Stratified, &mut rng).unwrap();
            let sum: f64 = a.data.iter().sum();
            assert!((sum - gap).abs() <= 0.05 * gap.abs(), "sum {sum} vs {gap}");
            checked += 1;
        }
        if checked >= 10 {
            break;
        }
    }
    assert!(checked >= 10, "only {checked} subsequences far from the baseline");
}

/// Denominators written out case by case.
fn eq_denominator(i: usize, len: usize, w: usize) -> f64 {
    if i == 1 || i == len {
        1.0
    } else if (2..=w).contains(&i) {
        i as f64
    } else if (w + 1..=len - w).contains(&i) {
        w as f64
    } else {
        (len - i) as f64
    }
}

fn squeeze_oracle(sp: &[Tensor], len: usize, w: usize, denom: impl Fn(usize) -> f64) -> Vec<f64> {
    let f = sp[0].cols();
    let mut out = vec![0.0; len * f];
    for i in 1..=len {
        for c in 0..f {
            let covering: Vec<f64> = (0..sp.len())
                .filter(|&s| s < i && i <= s + w)
                .map(|s| sp[s].data[(i - s - 1) * f + c])
                .collect();
            out[(i - 1) * f + c] = covering.iter().sum::<f64>() / denom(i);
        }
    }
    out
}

#[test]
fn squeeze_matches_coverage_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let sp: Vec<Tensor> = (0..91).map(|_| random_tensor(&mut rng, 6, FEATURE_COUNT, -1.0, 1.0)).collect();
        let got = temporal_squeeze(&sp, 96, 6, SqueezeMode::Verbatim).unwrap();
        assert_eq!(got.shape, vec![96, FEATURE_COUNT]);
        let want = squeeze_oracle(&sp, 96, 6, |i| eq_denominator(i, 96, 6));
        for (a, b) in got.data.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let got = temporal_squeeze(&sp, 96, 6, SqueezeMode::Coverage).unwrap();
        let counts = |i: usize| (0..91).filter(|&s| s < i && i <= s + 6).count() as f64;
        for (a, b) in got.data.iter().zip(squeeze_oracle(&sp, 96, 6, counts)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn squeeze_examples() {
    let zeros: Vec<Tensor> = (0..91).map(|_| Tensor::zeros(vec![6, 2])).collect();
    let v = temporal_squeeze(&zeros, 96, 6, SqueezeMode::Verbatim).unwrap();
    assert!(v.data.iter().all(|&x| x == 0.0));

    let mut sp = zeros.clone();
    sp[0].data[0] = 0.7;
    let v = temporal_squeeze(&sp, 96, 6, SqueezeMode::Verbatim).unwrap();
    assert_eq!(v.data[0], 0.7);

    // Tick 40 is covered by subsequences 34..=39 at rows 5..=0.
    let mut sp = zeros;
    for (k, s) in (34..=39).enumerate() {
        sp[s].data[(39 - s) * 2] = (k + 1) as f64;
    }
    let v = temporal_squeeze(&sp, 96, 6, SqueezeMode::Verbatim).unwrap();
    assert_eq!(v.data[39 * 2], 3.5);

    assert_eq!(denominator(96, 96, 6, SqueezeMode::Verbatim), 1);
    assert_eq!(denominator(95, 96, 6, SqueezeMode::Verbatim), 1);
    assert_eq!(denominator(92, 96, 6, SqueezeMode::Verbatim), 4);
    assert_eq!(denominator(92, 96, 6, SqueezeMode::Coverage), 5);
    assert!(matches!(
        temporal_squeeze(&sp[..90], 96, 6, SqueezeMode::Verbatim),
        Err(ExplainerError::ShapeMismatch { .. })
    ));
    assert_eq!("coverage".parse::<SqueezeMode>().unwrap(), SqueezeMode::Coverage);
}

proptest! {
    #[test]
    fn squeeze_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1: Vec<Tensor> = (0..91).map(|_| random_tensor(&mut rng, 6, 3, -1.0, 1.0)).collect();
        let s2: Vec<Tensor> = (0..91).map(|_| random_tensor(&mut rng, 6, 3, -1.0, 1.0)).collect();
        let mix: Vec<Tensor> = s1
            .iter()
            .zip(&s2)
            .map(|(p, q)| Tensor { shape: p.shape.clone(), data: p.data.iter().zip(&q.data).map(|(x, y)| a * x + b * y).collect() })
            .collect();
        for mode in [SqueezeMode::Verbatim, SqueezeMode::Coverage] {
            let l = temporal_squeeze(&mix, 96, 6, mode).unwrap();
            let r1 = temporal_squeeze(&s1, 96, 6, mode).unwrap();
            let r2 = temporal_squeeze(&s2, 96, 6, mode).unwrap();
            for k in 0..l.data.len() {
                prop_assert!((l.data[k] - (a * r1.data[k] + b * r2.data[k])).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn explanations_repeat_under_a_fixed_seed() {
    let (bundle, test) = tiny_bundle(3);
    let det = Detector::from_bundle(&bundle).unwrap();
    let bg = background_tensors(&bundle);
    let (series, _) = prepare(&test, bundle.window);
    let cfg = ExplainConfig { n_samples: 20, seed: 11, ..Default::default() };
    let a = explain_elimination(&det, &bundle.model_version(), &series[0].series, &bg, &cfg).unwrap();
    let b = explain_elimination(&det, &bundle.model_version(), &series[0].series, &bg, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.values.len(), 96);
    assert!(a.values.iter().all(|r| r.len() == FEATURE_COUNT && r.iter().all(|v| v.is_finite())));
    let other = explain_elimination(&det, &bundle.model_version(), &series[0].series, &bg, &ExplainConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn velocity_attribution_peaks_inside_the_snap() {
    let (bundle, _) = tiny_bundle(4);
    let det = Detector::from_bundle(&bundle).unwrap();
    let bg = background_tensors(&bundle);
    let cfg = ExplainConfig { n_samples: 24, seed: 5, ..Default::default() };
    let (mut cases, mut inside) = (0, 0);
    let mut player = 0u64;
    while cases < 60 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + player);
        let (stream, truth) = gen_player(&BehaviorProfile::aimbot(0.0), 4, "snap", &format!("p{player:02}"), Screen::default(), &mut rng);
        player += 1;
        let (windows, _) = extract_windows(&stream, "snap", 64, 32, Screen::default());
        for (w, t) in windows.iter().zip(&truth) {
            let Some((lo, hi)) = t.snap else { continue };
            assert_eq!(w.elim_tick(), t.elim_tick);
            let series = compute_features(w).unwrap();
            let m = explain_elimination(&det, "v", &series, &bg, &cfg).unwrap();
            let peak = (0..m.values.len())
                .max_by(|&i, &j| {
                    let mag = |k: usize| m.values[k][3].abs().max(m.values[k][4].abs());
                    mag(i).total_cmp(&mag(j))
                })
                .unwrap();
            let tick = series.tuples[peak].t;
            cases += 1;
            if (lo..=hi).contains(&tick) {
                inside += 1;
            }
        }
    }
    assert!(inside * 2 > cases, "peak inside the snap in {inside}/{cases} cases");
}

fn permutation_oracle(f: &dyn Fn(&[f64]) -> f64, x: &[f64], b: &[f64]) -> Vec<f64> {
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut phi = vec![0.0; 3];
    for order in orders {
        let mut point = b.to_vec();
        let mut prev = f(&point);
        for &j in &order {
            point[j] = x[j];
            let now = f(&point);
            phi[j] += (now - prev) / 6.0;
            prev = now;
        }
    }
    phi
}

#[test]
fn exact_shapley_matches_permutation_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r[0] + 0.5 * r[1] * r[2] > 0.0).collect();
    let forest = fit_forest(&rows, &labels, &ForestConfig { n_trees: 30, seed: 2, ..Default::default() }).unwrap();
    let f = |v: &[f64]| forest.predict_proba(v);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = exact_shapley(f, &x, &b, &["a", "b", "c"]).unwrap();
        let oracle = permutation_oracle(&f, &x, &b);
        for (got, want) in s.values.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12);
        }
        let total: f64 = s.values.iter().sum();
        assert!((total - (f(&x) - f(&b))).abs() < 1e-9);
        assert_eq!(s.prediction, f(&x));
        assert_eq!(s.baseline, f(&b));
    }
}

#[test]
fn shapley_axioms_on_small_functions() {
    let s = exact_shapley(|v| v[0], &[3.0, 1.0, 2.0], &[1.0, 5.0, 5.0], &["a", "b", "c"]).unwrap();
    assert_eq!(s.values, vec![2.0, 0.0, 0.0]);

    let sym = |v: &[f64]| sigmoid(v[0] + v[1] - 0.3 * v[0] * v[1]) + v[2];
    let s = exact_shapley(sym, &[0.7, 0.7, 0.1], &[-0.2, -0.2, 0.4], &["a", "b", "c"]).unwrap();
    assert!((s.values[0] - s.values[1]).abs() < 1e-15);

    let k = MAX_EXACT_FEATURES + 1;
    assert!(matches!(
        exact_shapley(|v| v[0], &vec![0.0; k], &vec![0.0; k], &vec!["f"; k]),
        Err(ExplainerError::TooManyFeatures(13))
    ));
}

#[test]
fn forest_match_explanation_is_efficient() {
    let (bundle, test) = tiny_bundle(5);
    let det = Detector::from_bundle(&bundle).unwrap();
    let pred = predict_match(&bundle, &det, &test[0]);
    let background = vec![0.5, 0.1, 0.3, 0.7, 3.0];
    for v in &pred.players {
        let s = explain_match(&bundle, &v.features.values, &background).unwrap();
        let total: f64 = s.values.iter().sum();
        assert!((total - (v.probability - s.baseline)).abs() < 1e-9);
        assert_eq!(s.prediction, v.probability);
        assert_eq!(s.names, vec!["mean", "std", "min", "max", "count"]);
    }
}

#[test]
fn explanation_document_round_trips() {
    let (bundle, test) = tiny_bundle(6);
    let det = Detector::from_bundle(&bundle).unwrap();
    let bg = background_tensors(&bundle);
    let (series, _) = prepare(&test, bundle.window);
    let l = &series[0];
    let cfg = ExplainConfig { n_samples: 10, ..Default::default() };
    let m = explain_elimination(&det, &bundle.model_version(), &l.series, &bg, &cfg).unwrap();
    let pred = predict_match(&bundle, &det, &test[0]);
    let verdict = pred.players.iter().find(|p| p.player_id == l.series.player_id).unwrap();
    let shap = explain_match(&bundle, &verdict.features.values, &[0.5, 0.0, 0.5, 0.5, 1.0]).unwrap();
    let doc = export_attribution(&l.window, &m, Some(&shap)).unwrap();
    assert_eq!(doc.ticks.len(), 96);
    assert_eq!(doc.ticks[0].t, l.series.tuples[0].t);
    assert_eq!(doc.feature_track("v_x"), m.values.iter().map(|r| r[3]).collect::<Vec<_>>());
    let json = serde_json::to_string(&doc).unwrap();
    let back: ExplanationDoc = serde_json::from_str(&json).unwrap();
    assert_eq!(back, doc);
    assert_eq!(serde_json::to_string(&back).unwrap(), json);
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(value["match"]["shapley"]["mean"].is_number());
    assert!(value["ticks"][0]["values"]["theta"].is_number());

    let zero = AttributionMatrix { values: vec![vec![0.0; FEATURE_COUNT]; 96], ..m.clone() };
    let doc = export_attribution(&l.window, &zero, None).unwrap();
    assert!(serde_json::from_str::<ExplanationDoc>(&serde_json::to_string(&doc).unwrap()).is_ok());

    let wrong = AttributionMatrix { elimination_id: "m/p/1".into(), ..m };
    assert!(matches!(export_attribution(&l.window, &wrong, None), Err(ExplainerError::IdMismatch(..))));
}
