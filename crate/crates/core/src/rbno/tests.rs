use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::fields::rng_for;
use crate::rom::{solve_rb, ReducedWeights};

/// Random SPD reduced weights of rank `r`.
fn random_weights(r: usize, seed: u64) -> ReducedWeights {
    let mut rng = rng_for(seed);
    let a: Vec<f64> = (0..r * r).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut w = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..r {
            w[i * r + j] = (0..r).map(|k| a[k * r + i] * a[k * r + j]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
        }
    }
    let alpha: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // β large enough that the loss stays nonnegative.
    let rw = ReducedWeights { w, alpha, beta: 0.0, seed };
    let s = solve_rb(&rw).unwrap();
    let min = rw.eval(&s).unwrap();
    ReducedWeights {
        beta: -min + rng.gen_range(0.01..0.1),
        ..rw
    }
}

fn random_dataset(n: usize, d: usize, r: usize, seed: u64) -> Dataset {
    let mut rng = rng_for(seed);
    let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let weights = (0..n).map(|i| random_weights(r, seed * 100 + i as u64)).collect();
    Dataset::with_optimal_labels(features, weights).unwrap()
}

/// Max over parameter tensors of `max|analytic - fd| / max|fd|`.
fn gradient_error(model: &Mlp, data: &Dataset, mode: LossMode) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, grads) = loss_and_grad(model, data, &idx, mode, 0.7).unwrap();
    let analytic = flatten(&grads);
    let p0 = model.params();
    let eps = 1e-6;
    let mut fd = vec![0.0; p0.len()];
    let mut probe = model.clone();
    for k in 0..p0.len() {
        let mut p = p0.clone();
        p[k] += eps;
        probe.set_params(&p).unwrap();
        let up = mean_objective(&probe, data, mode, 0.7).unwrap();
        p[k] -= 2.0 * eps;
        probe.set_params(&p).unwrap();
        let dn = mean_objective(&probe, data, mode, 0.7).unwrap();
        fd[k] = (up - dn) / (2.0 * eps);
    }
    let mut worst = 0.0f64;
    let mut start = 0;
    for l in &model.layers {
        for len in [l.w.len(), l.b.len()] {
            let range = start..start + len;
            let scale = fd[range.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = range.clone().map(|k| (analytic[k] - fd[k]).abs()).fold(0.0f64, f64::max);
            if scale > 0.0 {
                worst = worst.max(diff / scale);
            }
            start += len;
        }
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    for (seed, widths) in [(1u64, vec![4, 7, 3]), (2, vec![5, 6, 6, 4]), (3, vec![3, 9, 5, 5, 2])] {
        let data = random_dataset(3, widths[0], *widths.last().unwrap(), seed);
        let model = Mlp::xavier(&widths, &mut rng_for(seed + 10)).unwrap();
        for mode in [LossMode::Residual, LossMode::Both, LossMode::CoefMse] {
            let err = gradient_error(&model, &data, mode);
            assert!(err <= 1e-5, "seed {seed} {mode:?}: {err:e}");
        }
    }
}

#[test]
fn backprop_through_active_clip() {
    let data = random_dataset(3, 4, 3, 8);
    let mut model = Mlp::xavier(&[4, 8, 3], &mut rng_for(9)).unwrap();
    let y = model.forward(data.features.view()).unwrap();
    let smallest = y.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(f64::INFINITY, f64::min);
    model.clip = Some(0.5 * smallest);
    let err = gradient_error(&model, &data, LossMode::Residual);
    assert!(err <= 1e-5, "{err:e}");
}

/// A network whose output is exactly `target` for every input.
fn constant_net(d: usize, target: &[f64]) -> Mlp {
    let mut net = Mlp::zeros(&[d, 2, target.len()]).unwrap();
    net.layers[1].b = ndarray::Array1::from(target.to_vec());
    net
}

#[test]
fn optimal_output_is_stationary() {
    let data = random_dataset(1, 3, 4, 4);
    let opt = data.labels.as_ref().unwrap().row(0).to_vec();
    let net = constant_net(3, &opt);
    let (loss, grads) = loss_and_grad(&net, &data, &[0], LossMode::Residual, 1.0).unwrap();
    let w = &data.weights[0];
    assert!((loss - w.eval(&opt).unwrap()).abs() < 1e-12);
    assert!(grads[1].b.iter().all(|g| g.abs() < 1e-10), "{:?}", grads[1].b);
}

#[test]
fn zero_output_gives_mean_beta() {
    let data = random_dataset(5, 3, 4, 5);
    let net = Mlp::zeros(&[3, 6, 4]).unwrap();
    let idx: Vec<usize> = (0..5).collect();
    let (loss, _) = loss_and_grad(&net, &data, &idx, LossMode::Residual, 1.0).unwrap();
    let mean_beta = data.weights.iter().map(|w| w.beta).sum::<f64>() / 5.0;
    assert!((loss - mean_beta).abs() < 1e-12);
}

#[test]
fn coefficient_modes_need_labels() {
    let mut data = random_dataset(2, 3, 2, 6);
    data.labels = None;
    let net = Mlp::zeros(&[3, 2]).unwrap();
    assert!(loss_and_grad(&net, &data, &[0, 1], LossMode::CoefMse, 1.0).is_err());
    assert!(loss_and_grad(&net, &data, &[0, 1], LossMode::Both, 1.0).is_err());
    assert!(loss_and_grad(&net, &data, &[0, 1], LossMode::Residual, 1.0).is_ok());
}

#[test]
fn predictions_respect_the_galerkin_identity() {
    let data = random_dataset(6, 4, 5, 7);
    let net = Mlp::xavier(&[4, 10, 5], &mut rng_for(1)).unwrap();
    let (y, metrics) = evaluate(&net, &data).unwrap();
    for (i, m) in metrics.iter().enumerate() {
        assert!(m.loss >= m.optimal_loss - 1e-9);
        let d: Vec<f64> = y.row(i).iter().zip(data.labels.as_ref().unwrap().row(i)).map(|(a, b)| a - b).collect();
        let energy = data.weights[i].matrix().quad_form(&d);
        let excess = m.loss - m.optimal_loss;
        assert!((excess - energy).abs() <= 1e-9 * energy.max(1e-12), "{excess} vs {energy}");
    }
    let oracle = constant_net(4, &data.labels.as_ref().unwrap().row(0).to_vec());
    let (_, m) = evaluate(&oracle, &data.subset(&[0])).unwrap();
    assert!(m[0].error_rb < 1e-14);
}

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16],
        max_iters: 200,
        eval_every: 5,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn early_stopping_keeps_best_snapshot() {
    let all = random_dataset(30, 4, 3, 11);
    let (tr, va) = split_indices(30, 0.2, 3);
    let (train_set, val_set) = (all.subset(&tr), all.subset(&va));
    let out = train(&train_set, &val_set, &quick_config(1)).unwrap();
    assert_eq!(out.val_history[0].0, 0);
    assert!(out.val_history.iter().all(|&(_, v)| out.best_val <= v));
    let again = mean_objective(&out.model, &val_set, LossMode::Residual, 1.0).unwrap();
    assert_eq!(again, out.best_val);
    assert!(out.best_val < out.val_history[0].1);
    assert_eq!(out.train_history.len(), 200);
}

#[test]
fn training_is_bitwise_deterministic() {
    let all = random_dataset(20, 3, 2, 12);
    let (a, b) = (all.subset(&(0..15).collect::<Vec<_>>()), all.subset(&(15..20).collect::<Vec<_>>()));
    let mut cfg = quick_config(5);
    cfg.batch_size = 4;
    let r1 = train(&a, &b, &cfg).unwrap();
    let r2 = train(&a, &b, &cfg).unwrap();
    assert_eq!(r1.train_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), r2.train_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(r1.model, r2.model);
    cfg.seed = 6;
    let r3 = train(&a, &b, &cfg).unwrap();
    assert_ne!(r1.train_history, r3.train_history);
}

#[test]
fn single_sample_overfit_reaches_optimum() {
    let data = random_dataset(1, 4, 3, 13);
    let cfg = TrainConfig {
        hidden: vec![16, 16],
        max_iters: 3000,
        eval_every: 50,
        ..TrainConfig::default()
    };
    let out = train(&data, &data, &cfg).unwrap();
    let (_, m) = evaluate(&out.model, &data).unwrap();
    assert!(m[0].loss - m[0].optimal_loss < 1e-6, "{:e}", m[0].loss - m[0].optimal_loss);
}

#[test]
fn divergence_is_reported() {
    let data = random_dataset(4, 3, 2, 14);
    let cfg = TrainConfig {
        hidden: vec![8],
        lr: 1e4,
        weight_decay: 0.0,
        max_iters: 100,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&data, &data, &cfg), Err(crate::Error::Diverged { .. })));
}

#[test]
fn clipped_training_respects_loss_bound() {
    let data = random_dataset(12, 3, 3, 15);
    let cfg = TrainConfig {
        clip: true,
        ..quick_config(2)
    };
    let out = train(&data, &data, &cfg).unwrap();
    let b = out.model.clip.unwrap();
    let y = out.model.forward(data.features.view()).unwrap();
    assert!(y.rows().into_iter().all(|r| r.dot(&r).sqrt() <= b * (1.0 + 1e-12)));
    let m = loss_bound(&data.weights, b).unwrap();
    let (_, metrics) = evaluate(&out.model, &data).unwrap();
    assert!(metrics.iter().all(|x| x.loss <= m));
}

#[test]
fn biases_are_not_decayed() {
    let mut net = Mlp::xavier(&[2, 3, 2], &mut rng_for(1)).unwrap();
    net.layers[0].b.fill(1.0);
    let before = net.clone();
    let zero: Gradients = net.layers.iter().map(|l| Layer::zeros(l.w.ncols(), l.w.nrows())).collect();
    let cfg = TrainConfig::default();
    AdamW::new(&net).step(&mut net, &zero, 0.1, &cfg);
    assert_eq!(net.layers[0].b, before.layers[0].b);
    let ratio = net.layers[0].w[[0, 0]] / before.layers[0].w[[0, 0]];
    assert!((ratio - (1.0 - 0.1 * cfg.weight_decay)).abs() < 1e-15);
}

#[test]
fn step_decay_schedule() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.lr_at(1), 1e-3);
    assert_eq!(cfg.lr_at(50), 1e-3);
    assert!((cfg.lr_at(51) - 0.9e-3).abs() < 1e-18);
    assert!((cfg.lr_at(101) - 0.81e-3).abs() < 1e-18);
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    let bad = [
        TrainConfig { lr: 0.0, ..Default::default() },
        TrainConfig { loss_mode: LossMode::Both, mse_weight: 0.0, ..Default::default() },
        TrainConfig { gamma: 1.5, ..Default::default() },
        TrainConfig { val_fraction: 1.0, ..Default::default() },
        TrainConfig { hidden: vec![0], ..Default::default() },
    ];
    assert!(bad.iter().all(|c| c.validate().is_err()));
    let json = r#"{"loss_mode": "both", "mse_weight": 0.5}"#;
    let c: TrainConfig = serde_json::from_str(json).unwrap();
    assert_eq!(c.loss_mode, LossMode::Both);
    assert_eq!(c.hidden, vec![256, 256]);
}

#[test]
fn checkpoint_matrices_round_trip() {
    let mut net = Mlp::xavier(&[3, 5, 2], &mut rng_for(3)).unwrap();
    net.layers[1].b.fill(0.25);
    let back = model_from_matrices(&layer_matrices(&net), net.slope, Some(2.0)).unwrap();
    assert_eq!(back.layers, net.layers);
    assert_eq!(back.clip, Some(2.0));
}

#[test]
fn histogram_bins() {
    let edges = log_edges(0.1, 10.0, 2);
    assert!((edges[1] - 1.0).abs() < 1e-12);
    assert_eq!(histogram(&[0.01, 0.5, 1.0, 3.0, 100.0, f64::NAN], &[0.1, 1.0, 10.0]), vec![2, 3]);
    assert_eq!(histogram(&[0.5, 2.0], &edges), vec![1, 1]);
}

proptest! {
    #[test]
    fn split_partitions_indices(n in 2usize..60, frac in 0.0f64..0.9, seed in any::<u64>()) {
        let (a, b) = split_indices(n, frac, seed);
        prop_assert!(!a.is_empty());
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split_indices(n, frac, seed), (a, b));
    }

    #[test]
    fn model_loss_never_below_optimum(seed in 0u64..1000) {
        let data = random_dataset(4, 3, 3, seed);
        let net = Mlp::xavier(&[3, 5, 3], &mut rng_for(seed)).unwrap();
        let (_, m) = evaluate(&net, &data).unwrap();
        prop_assert!(m.iter().all(|x| x.loss >= x.optimal_loss - 1e-9));
    }
}
