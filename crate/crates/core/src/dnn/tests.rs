use super::*;
use crate::math::unpack_bits;
use proptest::prelude::*;
use rand::Rng;

fn random_rbm(d: usize, m: usize, scale: f64, seed: u64) -> RbmParams {
    let mut r = rng::stream(seed);
    let mut u = || scale * (2.0 * r.gen::<f64>() - 1.0);
    let w: Vec<f64> = (0..d * m).map(|_| u()).collect();
    let a: Vec<f64> = (0..d).map(|_| u()).collect();
    let b: Vec<f64> = (0..m).map(|_| u()).collect();
    RbmParams::from_parts(d, m, &w, &a, &b).unwrap()
}

fn two_layer(seed: u64) -> DnnModel {
    DnnModel::new(vec![random_rbm(4, 3, 1.5, seed), random_rbm(3, 1, 1.5, seed + 1)], false).unwrap()
}

/// Exact mean and variance of the top activation under hidden sampling,
/// by enumerating all hidden configurations of the first layer.
fn exact_sample_moments(model: &DnnModel, x: &[u8]) -> (f64, f64) {
    let (low, top) = (&model.layers()[0], &model.layers()[1]);
    let m = low.n_hidden();
    let probs: Vec<f64> = (0..m).map(|j| sigmoid(low.hidden_input(x, j))).collect();
    let mut h = vec![0u8; m];
    let (mut mean, mut second) = (0.0, 0.0);
    for idx in 0..1usize << m {
        unpack_bits(idx, &mut h);
        let weight: f64 = h
            .iter()
            .zip(&probs)
            .map(|(&v, &p)| if v == 1 { p } else { 1.0 - p })
            .product();
        let s = sigmoid(top.hidden_input(&h, 0));
        mean += weight * s;
        second += weight * s * s;
    }
    (mean, second - mean * mean)
}

fn block_data(n: usize, seed: u64) -> PredictionMatrix {
    // two noisy groups of four copies of a hidden label
    let mut r = rng::stream(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng::bernoulli(&mut r, 0.5);
        let row: Vec<u8> = (0..8)
            .map(|_| if rng::bernoulli(&mut r, 0.85) == 1 { y } else { 1 - y })
            .collect();
        rows.push(row);
    }
    PredictionMatrix::from_rows(&rows).unwrap()
}

#[test]
fn svd_rule_examples() {
    assert_eq!(width_from_singular_values(&[10.0, 0.2, 0.1]).unwrap(), 1);
    assert_eq!(width_from_singular_values(&[5.0, 4.0, 1.0, 0.1]).unwrap(), 3);
    assert_eq!(width_from_singular_values(&[0.1, 1.0, 4.0, 5.0]).unwrap(), 3);
    assert_eq!(width_from_singular_values(&[1.0; 4]).unwrap(), 4);
    assert!(width_from_singular_values(&[0.0, 0.0]).is_err());
}

#[test]
fn svd_rule_on_weight_matrix() {
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 4.0, 1.0, 0.1]));
    assert_eq!(choose_hidden_width(&w).unwrap(), 3);
    // rank one matrix
    let u = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let v = nalgebra::DVector::from_vec(vec![0.3, 0.7]);
    assert_eq!(choose_hidden_width(&(u * v.transpose())).unwrap(), 1);
}

#[test]
fn single_layer_prediction_is_hidden_activation() {
    let rbm = random_rbm(5, 1, 2.0, 1);
    let model = DnnModel::new(vec![rbm.clone()], false).unwrap();
    let x = [1u8, 0, 1, 1, 0];
    let mut r = rng::stream(0);
    let expect = sigmoid(rbm.hidden_input(&x, 0));
    for mode in [PredictMode::Sample, PredictMode::Map] {
        let p = propagate_predict(&model, &x, mode, 3, &mut r).unwrap();
        assert!((p - expect).abs() < 1e-15);
    }
    let flipped = model.with_flip(true);
    let p = propagate_predict(&flipped, &x, PredictMode::Map, 1, &mut r).unwrap();
    assert!((p - (1.0 - expect)).abs() < 1e-15);
}

#[test]
fn map_mode_thresholds_hidden_units() {
    let model = two_layer(2);
    let (low, top) = (&model.layers()[0], &model.layers()[1]);
    let mut x = [0u8; 4];
    let mut r = rng::stream(0);
    for idx in 0..16 {
        unpack_bits(idx, &mut x);
        let h: Vec<u8> = (0..3).map(|j| (sigmoid(low.hidden_input(&x, j)) >= 0.5) as u8).collect();
        let expect = sigmoid(top.hidden_input(&h, 0));
        let got = propagate_predict(&model, &x, PredictMode::Map, 1, &mut r).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }
}

#[test]
fn sample_mode_matches_enumeration() {
    let model = two_layer(3);
    let passes = 20_000;
    let mut r = rng::stream(4);
    let mut x = [0u8; 4];
    for idx in 0..16 {
        unpack_bits(idx, &mut x);
        let (mean, var) = exact_sample_moments(&model, &x);
        let se = (var / passes as f64).sqrt();
        let got = propagate_predict(&model, &x, PredictMode::Sample, passes, &mut r).unwrap();
        assert!((got - mean).abs() < 3.0 * se + 1e-12, "pattern {idx}: {got} vs {mean} (se {se})");
    }
}

#[test]
fn sample_mode_error_shrinks_with_passes() {
    let model = two_layer(5);
    let x = [1u8, 0, 1, 0];
    let (mean, _) = exact_sample_moments(&model, &x);
    let mut r = rng::stream(6);
    let mut rmse = |passes: usize| {
        let reps = 400;
        let sq: f64 = (0..reps)
            .map(|_| {
                let p = propagate_predict(&model, &x, PredictMode::Sample, passes, &mut r).unwrap();
                assert!((0.0..=1.0).contains(&p));
                (p - mean).powi(2)
            })
            .sum();
        (sq / reps as f64).sqrt()
    };
    let (e10, e100, e1000) = (rmse(10), rmse(100), rmse(1000));
    // each tenfold increase should shrink the error by about sqrt(10)
    for ratio in [e10 / e100, e100 / e1000] {
        assert!((2.5..4.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn flip_complements_output() {
    let model = two_layer(7);
    let flipped = model.clone().with_flip(true);
    let x = [0u8, 1, 1, 0];
    let p = propagate_predict(&model, &x, PredictMode::Sample, 50, &mut rng::stream(8)).unwrap();
    let q = propagate_predict(&flipped, &x, PredictMode::Sample, 50, &mut rng::stream(8)).unwrap();
    assert!((p + q - 1.0).abs() < 1e-12);
}

#[test]
fn prediction_rejects_bad_input() {
    let model = two_layer(9);
    let mut r = rng::stream(0);
    assert!(propagate_predict(&model, &[1, 0, 1], PredictMode::Map, 1, &mut r).is_err());
    assert!(propagate_predict(&model, &[1, 0, 1, 0], PredictMode::Sample, 0, &mut r).is_err());
}

#[test]
fn flip_resolution_against_majority_vote() {
    let data = PredictionMatrix::from_rows(&[[1u8, 1, 1], [0, 0, 0], [1, 1, 0], [0, 0, 1]]).unwrap();
    let agree = RbmParams::from_parts(3, 1, &[4.0, 4.0, 4.0], &[0.0; 3], &[-6.0]).unwrap();
    let disagree = RbmParams::from_parts(3, 1, &[-4.0, -4.0, -4.0], &[0.0; 3], &[6.0]).unwrap();
    let m = DnnModel::new(vec![agree], false).unwrap();
    assert!(!resolve_label_flip(&m, &data).unwrap());
    let m = DnnModel::new(vec![disagree], false).unwrap();
    assert!(resolve_label_flip(&m, &data).unwrap());

    // rows 0 and 2 agree, rows 1 and 3 do not: exactly half keeps the orientation
    let half = RbmParams::from_parts(3, 1, &[10.0, 0.0, 0.0], &[0.0; 3], &[-5.0]).unwrap();
    let data = PredictionMatrix::from_rows(&[[1u8, 1, 1], [1, 0, 0], [0, 0, 0], [0, 1, 1]]).unwrap();
    let m = DnnModel::new(vec![half], true).unwrap();
    assert!(!resolve_label_flip(&m, &data).unwrap());
}

#[test]
fn model_construction_checks_shapes() {
    assert!(DnnModel::new(vec![], false).is_err());
    assert!(DnnModel::new(vec![random_rbm(4, 2, 1.0, 0)], false).is_err());
    assert!(DnnModel::new(vec![random_rbm(4, 3, 1.0, 0), random_rbm(2, 1, 1.0, 0)], false).is_err());
    assert!(DnnModel::new(vec![random_rbm(4, 4, 1.0, 0), random_rbm(4, 1, 1.0, 0)], false).is_err());
    let m = two_layer(0);
    assert_eq!(m.architecture(), vec![4, 3, 1]);
    assert_eq!(m.architecture_string(), "4-3-1");
}

#[test]
fn json_round_trip_is_bit_exact() {
    let m = two_layer(11).with_flip(true);
    let back = DnnModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
    let mut x = [0u8; 4];
    for idx in 0..16 {
        unpack_bits(idx, &mut x);
        let a = propagate_predict(&m, &x, PredictMode::Sample, 20, &mut rng::stream(idx as u64)).unwrap();
        let b = propagate_predict(&back, &x, PredictMode::Sample, 20, &mut rng::stream(idx as u64)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let tampered = m.to_json().unwrap().replace("\"4-3-1\"", "x").replace("rbmvote-dnn", "other");
    assert!(DnnModel::from_json(&tampered).is_err());
}

#[test]
fn train_stack_is_deterministic_and_ends_at_one() {
    let data = block_data(2000, 12);
    let config = TrainConfig {
        epochs: 30,
        seed: 13,
        ..TrainConfig::default()
    };
    let (a, report) = train_stack_with_report(&data, &config).unwrap();
    let b = train_stack(&data, &config).unwrap();
    assert_eq!(a, b);
    let arch = a.architecture();
    assert_eq!(arch[0], 8);
    assert_eq!(*arch.last().unwrap(), 1);
    assert!(arch.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(report.layers.len(), a.layers().len());
    for (l, rep) in report.layers.iter().enumerate() {
        assert_eq!(rep.input_width, arch[l]);
        assert_eq!(rep.chosen_width, arch[l + 1]);
        assert_eq!(rep.probe_singular_values.len(), arch[l]);
    }
    // the trained network should track the shared label
    let preds = predict_batch(&a, &data, PredictMode::Map, 1, &mut rng::stream(0)).unwrap();
    let mv = majority_vote(&data);
    assert!(agreement(&threshold(&preds), &mv) > 0.8);
}

#[test]
fn train_stack_rejects_single_column() {
    let data = PredictionMatrix::from_rows(&[[1u8], [0]]).unwrap();
    assert!(train_stack(&data, &TrainConfig::default()).is_err());
}

#[test]
fn hidden_representations_have_layer_widths() {
    let model = two_layer(14);
    let rows: Vec<Vec<u8>> = block_data(50, 15).rows().map(|r| r[..4].to_vec()).collect();
    let data = PredictionMatrix::from_rows(&rows).unwrap();
    let reps = model.hidden_representations(&data, &mut rng::stream(0)).unwrap();
    assert_eq!(reps.len(), 1);
    assert_eq!((reps[0].n_rows(), reps[0].n_cols()), (50, 3));
}

#[test]
fn holdout_split_sizes() {
    let data = block_data(105, 16);
    let (train, hold) = holdout_split(&data, &mut rng::stream(0)).unwrap();
    assert_eq!((train.n_rows(), hold.n_rows()), (95, 10));
    assert!(holdout_split(&block_data(1, 0), &mut rng::stream(0)).is_err());
}

#[test]
fn search_space_validation() {
    let mut s = HyperSpace {
        n_configs: 0,
        ..HyperSpace::default()
    };
    assert!(s.validate().is_err());
    s.n_configs = 3;
    s.validate().unwrap();
    s.learning_rate = Some(ParamRange::log(0.0, 0.1));
    assert!(s.validate().is_err());
    s.learning_rate = Some(ParamRange::linear(0.2, 0.1));
    assert!(s.validate().is_err());
}

#[test]
fn search_samples_within_ranges() {
    let s = HyperSpace {
        epochs: Some(ParamRange::linear(2.0, 4.0)),
        ..HyperSpace::default()
    };
    let mut r = rng::stream(17);
    for _ in 0..200 {
        let c = s.sample(&mut r);
        assert!((0.005..=0.2).contains(&c.learning_rate));
        assert!((1e-5..=1e-2).contains(&c.weight_decay));
        assert!((0.5..=0.95).contains(&c.momentum));
        assert!((2..=4).contains(&c.epochs));
        assert_eq!(c.batch_size, s.base.batch_size);
    }
}

#[test]
fn search_picks_best_trial_deterministically() {
    let data = block_data(400, 18);
    let space = HyperSpace {
        epochs: Some(ParamRange::linear(3.0, 3.0)),
        n_configs: 4,
        ..HyperSpace::default()
    };
    let a = random_hyperparameter_search(&data, &space, &mut rng::stream(19)).unwrap();
    let b = random_hyperparameter_search(&data, &space, &mut rng::stream(19)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trials.len(), 4);
    assert!(a.trials.iter().all(|t| t.score <= a.score && t.score < 0.0));
}

#[test]
fn search_score_matches_independent_recomputation() {
    let data = block_data(300, 22);
    let space = HyperSpace {
        epochs: Some(ParamRange::linear(2.0, 2.0)),
        n_configs: 1,
        ..HyperSpace::default()
    };
    let r = rng::stream(23);
    let result = random_hyperparameter_search(&data, &space, &mut r.clone()).unwrap();

    let mut replay = r;
    let (train, holdout) = holdout_split(&data, &mut replay).unwrap();
    let config = space.sample(&mut replay);
    assert_eq!(result.best, config);
    let params = crate::rbm::train_rbm(&train, 1, &config).unwrap();
    let expect = params.exact_log_likelihood(&holdout).unwrap() / holdout.n_rows() as f64;
    assert!((result.score - expect).abs() < 1e-12);
}

#[test]
fn free_energy_gap_scores_structure_above_noise() {
    let data = block_data(400, 20);
    let config = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let params = train_rbm_with_rng(&data, 1, &config, &mut rng::stream(21)).unwrap();
    // force the large-d path by widening with a constant column pair
    let wide: Vec<Vec<u8>> = data.rows().map(|r| r.iter().cycle().take(24).copied().collect()).collect();
    let wide = PredictionMatrix::from_rows(&wide).unwrap();
    let wide_params = train_rbm_with_rng(&wide, 1, &config, &mut rng::stream(21)).unwrap();
    assert!(holdout_score(&params, &data, &mut rng::stream(0)).unwrap() < 0.0);
    assert!(holdout_score(&wide_params, &wide, &mut rng::stream(0)).unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stacked_widths_strictly_decrease(d in 2usize..=30, seed in any::<u64>()) {
        let mut r = rng::stream(seed);
        let rows: Vec<Vec<u8>> = (0..120)
            .map(|_| (0..d).map(|_| rng::bernoulli(&mut r, 0.5)).collect())
            .collect();
        let data = PredictionMatrix::from_rows(&rows).unwrap();
        let config = TrainConfig { epochs: 2, seed, ..TrainConfig::default() };
        let model = train_stack(&data, &config).unwrap();
        let arch = model.architecture();
        prop_assert_eq!(arch[0], d);
        prop_assert_eq!(*arch.last().unwrap(), 1);
        prop_assert!(arch.windows(2).all(|w| w[1] < w[0]));
    }
}
