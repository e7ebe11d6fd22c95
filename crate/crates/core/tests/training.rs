//! End-to-end training behavior: determinism, parameter-clip safety,
//! stability accounting, burn-in masking and actual learning on scaled-down
//! tasks.

use adlif_core::systems::{bsd_generate, spring_mass_dataset, spring_mass_generate, BsdSpec};
use adlif_core::trainer::{
    autoregress_eval, backward, bucketed_mse, forward, loss_and_grad, train_classifier,
    train_regressor, BurnIn, ClassificationTask, ForwardOptions, LayerSpec, LossKind, Network,
    NetworkArch, NeuronKind, RegressionTask, SurrogateConfig, Target, TauOut, TrainConfig,
};

fn bsd_arch(kind: NeuronKind, hidden: usize, n_classes: usize) -> NetworkArch {
    let mut spec = LayerSpec::new(kind, hidden, true);
    if kind == NeuronKind::Lif {
        spec.tau_u_range = [5.0, 50.0];
    }
    NetworkArch {
        input_dim: 10,
        layers: vec![spec],
        outputs: n_classes,
        tau_out: TauOut::Fixed(15.0),
        theta: 1.0,
        dt_ms: 1.0,
    }
}

fn small_task(n_classes: usize, n_samples: usize, seed: u64) -> ClassificationTask<f64> {
    let spec = BsdSpec::generate(n_classes, seed).unwrap();
    let data = bsd_generate(&spec, n_samples, seed);
    ClassificationTask::from_bsd(&data)
}

#[test]
fn training_is_seed_deterministic() {
    let task = small_task(4, 120, 3);
    let cfg = TrainConfig { epochs: 2, batch_size: 32, ..TrainConfig::default() };
    let run = || {
        let mut net = Network::<f64>::init(bsd_arch(NeuronKind::SeAdLif, 24, 4), 5);
        train_classifier(&mut net, &task, &cfg)
    };
    let a = run();
    let b = run();
    assert_eq!(a.log.len(), b.log.len());
    for (ra, rb) in a.log.iter().zip(&b.log) {
        assert_eq!(ra.train_loss.to_bits(), rb.train_loss.to_bits());
        assert_eq!(ra.val_metric.to_bits(), rb.val_metric.to_bits());
        assert_eq!(ra.grad_norm.to_bits(), rb.grad_norm.to_bits());
    }
    assert_eq!(a.best_params, b.best_params);
}

#[test]
fn parameters_stay_clipped_and_se_neurons_stay_stable() {
    let task = small_task(4, 120, 11);
    let cfg = TrainConfig { epochs: 3, batch_size: 32, lr: 0.05, ..TrainConfig::default() };
    let mut net = Network::<f64>::init(bsd_arch(NeuronKind::SeAdLif, 24, 4), 2);
    let outcome = train_classifier(&mut net, &task, &cfg);
    assert!(outcome.diverged.is_none());
    let spec = &net.arch().layers[0];
    let ll = &net.layout().layers[0];
    for i in 0..spec.size {
        let theta_u = net.params()[ll.theta_u.start + i];
        assert!((0.0..=1.0).contains(&theta_u));
        let a_hat = net.params()[ll.a_hat.as_ref().unwrap().start + i];
        assert!((spec.a_hat_range[0]..=spec.a_hat_range[1]).contains(&a_hat));
        let b_hat = net.params()[ll.b_hat.as_ref().unwrap().start + i];
        assert!((spec.b_hat_range[0]..=spec.b_hat_range[1]).contains(&b_hat));
    }
    // Every SE neuron within the clipped ranges has decay rate < 1.
    for row in &outcome.log {
        assert_eq!(row.unstable_neurons, 0, "epoch {}", row.epoch);
    }
}

#[test]
fn burn_in_window_is_inert() {
    // Perturbing targets inside the burn-in window changes nothing.
    let net = Network::<f64>::init(bsd_arch(NeuronKind::SeAdLif, 12, 3), 7);
    let t_steps = 50;
    let input: Vec<f64> = (0..t_steps * 10).map(|i| ((i * 31 % 17) as f64) / 17.0).collect();
    let trace = forward(&net, &input, t_steps, &ForwardOptions::default()).unwrap();
    let burn = BurnIn::Fraction(0.8);
    let labels_a: Vec<usize> = (0..t_steps).map(|k| if k < 40 { 0 } else { 2 }).collect();
    let labels_b: Vec<usize> = (0..t_steps).map(|k| if k < 40 { 1 } else { 2 }).collect();
    let (la, ga) = loss_and_grad(trace.outputs(), 3, Target::ClassPerStep(&labels_a), LossKind::PerStepCe, burn);
    let (lb, gb) = loss_and_grad(trace.outputs(), 3, Target::ClassPerStep(&labels_b), LossKind::PerStepCe, burn);
    assert_eq!(la, lb);
    assert_eq!(ga, gb);
    let sur = SurrogateConfig::default();
    let pa = backward(&net, &trace, &ga, &sur);
    let pb = backward(&net, &trace, &gb, &sur);
    assert_eq!(pa.params, pb.params);
}

#[test]
fn learns_an_easy_classification_task() {
    // 3-class BSD with plenty of data relative to network size; accuracy
    // should move far beyond chance in a handful of epochs.
    let task = small_task(3, 600, 21);
    let cfg = TrainConfig { epochs: 45, batch_size: 64, ..TrainConfig::default() };
    let mut net = Network::<f64>::init(bsd_arch(NeuronKind::SeAdLif, 64, 3), 4);
    let outcome = train_classifier(&mut net, &task, &cfg);
    assert!(outcome.diverged.is_none());
    assert!(
        outcome.best_val > 0.65,
        "validation accuracy stuck at {} (chance 0.33)",
        outcome.best_val
    );
}

#[test]
fn regression_protocol_learns_and_reports() {
    let sys = spring_mass_generate(4, [500.0, 10_000.0], 2.5, 17).unwrap();
    let data = spring_mass_dataset(&sys, 384, 200, 17);
    let task = RegressionTask::<f64>::from_trajectories(&data);
    let mut spec = LayerSpec::new(NeuronKind::SeAdLif, 64, true);
    spec.q = 228.0;
    spec.tau_u_range = [5.0, 25.0];
    spec.tau_w_range = [60.0, 300.0];
    let arch = NetworkArch {
        input_dim: 4,
        layers: vec![spec],
        outputs: 4,
        tau_out: TauOut::Trainable([1.0, 20.0]),
        theta: 1.0,
        dt_ms: 2.5,
    };
    let mut net = Network::<f64>::init(arch, 3);
    let cfg = TrainConfig {
        epochs: 14,
        batch_size: 64,
        burn_in: BurnIn::Steps(0),
        loss: LossKind::Mse,
        ..TrainConfig::default()
    };
    let before = adlif_core::trainer::eval_regressor(&net, &task.val, task.t_steps, task.switch_step);
    let outcome = train_regressor(&mut net, &task, &cfg);
    assert!(outcome.diverged.is_none());
    assert!(
        outcome.best_val < before * 0.5,
        "protocol MSE barely moved: {} -> {}",
        before,
        outcome.best_val
    );
    // Closed-loop report on fresh trajectories.
    let eval = spring_mass_dataset(&sys, 24, 300, 99);
    let eval_task = RegressionTask::<f64>::from_trajectories(&eval);
    let mut all: Vec<Vec<f64>> = eval_task.train.clone();
    all.extend(eval_task.val.iter().cloned());
    all.extend(eval_task.test.iter().cloned());
    let report = autoregress_eval(&net, &all, 300, 100, 10);
    assert_eq!(report.bucket_mse.len(), (300usize - 1 - 100).div_ceil(10));
    assert!(report.baseline_mse > 0.0);
    assert!(report.degradation_ms >= 0.0);
}

#[test]
fn untrained_net_degrades_immediately() {
    let sys = spring_mass_generate(4, [500.0, 10_000.0], 2.5, 23).unwrap();
    let data = spring_mass_dataset(&sys, 16, 200, 23);
    let task = RegressionTask::<f64>::from_trajectories(&data);
    let arch = NetworkArch {
        input_dim: 4,
        layers: vec![LayerSpec::new(NeuronKind::SeAdLif, 30, true)],
        outputs: 4,
        tau_out: TauOut::Fixed(10.0),
        theta: 1.0,
        dt_ms: 2.5,
    };
    let net = Network::<f64>::init(arch, 8);
    let report = autoregress_eval(&net, &task.train, task.t_steps, task.switch_step, 10);
    // An untrained network outputs near-zero values, i.e. it behaves like
    // the baseline model itself: never substantially better than baseline,
    // and it degrades within the first buckets.
    assert!(
        report.autoregressive_mse >= 0.75 * report.baseline_mse,
        "untrained predictor beat the zero baseline: {} vs {}",
        report.autoregressive_mse,
        report.baseline_mse
    );
    assert!(report.degradation_ms <= 3.0 * report.bucket_ms);
}

#[test]
fn bucketed_mse_of_perfect_predictions_is_zero() {
    let errs = vec![0.0; 100];
    assert!(bucketed_mse(&errs, 10).iter().all(|&m| m == 0.0));
    let errs: Vec<f64> = (0..25).map(|i| i as f64).collect();
    let buckets = bucketed_mse(&errs, 10);
    assert_eq!(buckets.len(), 3);
    assert_eq!(buckets[0], 4.5);
    assert_eq!(buckets[2], 22.0);
}

#[test]
fn identical_batch_samples_produce_identical_traces() {
    let net = Network::<f64>::init(bsd_arch(NeuronKind::SeAdLif, 16, 3), 2);
    let sample: Vec<f64> = (0..50 * 10).map(|i| ((i * 7 % 13) as f64) / 13.0).collect();
    let t1 = forward(&net, &sample, 50, &ForwardOptions::default()).unwrap();
    let t2 = forward(&net, &sample, 50, &ForwardOptions::default()).unwrap();
    assert_eq!(t1.y, t2.y);
}

#[test]
fn dropout_masks_are_deterministic_and_scale() {
    use adlif_core::trainer::DropoutPlan;
    let net = Network::<f64>::init(bsd_arch(NeuronKind::SeAdLif, 16, 3), 2);
    let sample: Vec<f64> = (0..50 * 10).map(|i| ((i * 7 % 13) as f64) / 13.0).collect();
    let opts = ForwardOptions {
        autoregress_from: None,
        dropout: Some(DropoutPlan { rate: 0.15, seed: 1, stream: 9 }),
    };
    let t1 = forward(&net, &sample, 50, &opts).unwrap();
    let t2 = forward(&net, &sample, 50, &opts).unwrap();
    assert_eq!(t1.layers[0].mask, t2.layers[0].mask);
    let scale = 1.0 / 0.85;
    assert!(t1.layers[0]
        .mask
        .iter()
        .all(|&m| m == 0.0 || (m - scale).abs() < 1e-12));
    let kept = t1.layers[0].mask.iter().filter(|&&m| m != 0.0).count() as f64
        / t1.layers[0].mask.len() as f64;
    assert!((kept - 0.85).abs() < 0.05, "keep rate {kept}");
}
