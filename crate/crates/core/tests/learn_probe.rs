// Temporary: learning-curve probes.
use adlif_core::systems::*;
use adlif_core::trainer::*;

#[test]
#[ignore]
fn bsd_curve() {
    let spec = BsdSpec::generate(3, 21).unwrap();
    let data = bsd_generate(&spec, 600, 21);
    let task = ClassificationTask::<f64>::from_bsd(&data);
    let mut spec_l = LayerSpec::new(NeuronKind::SeAdLif, 64, true);
    spec_l.q = 120.0;
    let arch = NetworkArch { input_dim: 10, layers: vec![spec_l], outputs: 3,
        tau_out: TauOut::Fixed(15.0), theta: 1.0, dt_ms: 1.0 };
    let mut net = Network::<f64>::init(arch, 4);
    let cfg = TrainConfig { epochs: 40, batch_size: 64, ..TrainConfig::default() };
    let out = train_classifier(&mut net, &task, &cfg);
    for r in out.log.iter() {
        println!("ep {:3} loss {:.4} val {:.3} test {:.3} gnorm {:.3}", r.epoch, r.train_loss, r.val_metric, r.test_metric, r.grad_norm);
    }
    // spike stats
    let trace = forward(&net, &task.train_x[0], 200, &ForwardOptions::default()).unwrap();
    let rate: f64 = trace.layers[0].out.iter().sum::<f64>() / trace.layers[0].out.len() as f64;
    println!("hidden spike rate after training: {rate:.4}");
}

#[test]
#[ignore]
fn spring_curve() {
    let sys = spring_mass_generate(4, [500.0, 10_000.0], 2.5, 17).unwrap();
    let data = spring_mass_dataset(&sys, 512, 200, 17);
    let task = RegressionTask::<f64>::from_trajectories(&data);
    let mut spec = LayerSpec::new(NeuronKind::SeAdLif, 100, true);
    spec.q = 228.0;
    let arch = NetworkArch { input_dim: 4, layers: vec![spec], outputs: 4,
        tau_out: TauOut::Trainable([1.0, 20.0]), theta: 1.0, dt_ms: 2.5 };
    let mut net = Network::<f64>::init(arch, 3);
    let cfg = TrainConfig { epochs: 30, batch_size: 64, burn_in: BurnIn::Steps(0),
        loss: LossKind::Mse, ..TrainConfig::default() };
    let out = train_regressor(&mut net, &task, &cfg);
    for r in out.log.iter().step_by(2) {
        println!("ep {:3} loss {:.5} val {:.5} gnorm {:.3}", r.epoch, r.train_loss, r.val_metric, r.grad_norm);
    }
    let trace = forward(&net, &task.train[0][..199*4], 199, &ForwardOptions::default()).unwrap();
    let rate: f64 = trace.layers[0].out.iter().sum::<f64>() / trace.layers[0].out.len() as f64;
    println!("hidden spike rate: {rate:.4}");
    let report = autoregress_eval(&net, &task.val, 200, 100, 10);
    println!("baseline {:.4} buckets {:?}", report.baseline_mse, report.bucket_mse.iter().map(|m| (m*1000.0).round()/1000.0).collect::<Vec<_>>());
}

#[test]
#[ignore]
fn untrained_numbers() {
    let sys = spring_mass_generate(4, [500.0, 10_000.0], 2.5, 23).unwrap();
    let data = spring_mass_dataset(&sys, 16, 200, 23);
    let task = RegressionTask::<f64>::from_trajectories(&data);
    let arch = NetworkArch { input_dim: 4, layers: vec![LayerSpec::new(NeuronKind::SeAdLif, 30, true)], outputs: 4,
        tau_out: TauOut::Fixed(10.0), theta: 1.0, dt_ms: 2.5 };
    let net = Network::<f64>::init(arch, 8);
    let report = autoregress_eval(&net, &task.train, task.t_steps, task.switch_step, 10);
    println!("baseline {:.4} deg {:.1} buckets {:?}", report.baseline_mse, report.degradation_ms,
        report.bucket_mse.iter().map(|m| (m*1000.0).round()/1000.0).collect::<Vec<_>>());
}

fn desk_arch(kind: NeuronKind, hidden: usize) -> NetworkArch {
    let mut spec = LayerSpec::new(kind, hidden, true);
    if kind == NeuronKind::Lif {
        spec.tau_u_range = [5.0, 50.0];
    }
    NetworkArch { input_dim: 10, layers: vec![spec], outputs: 10,
        tau_out: TauOut::Fixed(15.0), theta: 1.0, dt_ms: 1.0 }
}

#[test]
#[ignore]
fn full_bsd_se() {
    let spec = BsdSpec::generate(10, 7).unwrap();
    let data = bsd_generate(&spec, 4000, 7);
    let task = ClassificationTask::<f32>::from_bsd(&data);
    let mut net = Network::<f32>::init(desk_arch(NeuronKind::SeAdLif, 256), 1);
    let cfg = TrainConfig { epochs: 100, batch_size: 128, ..TrainConfig::default() };
    let t0 = std::time::Instant::now();
    let out = train_classifier(&mut net, &task, &cfg);
    for r in out.log.iter().step_by(5) {
        println!("SE ep {:3} loss {:.4} val {:.3} test {:.3} gnorm {:.3}", r.epoch, r.train_loss, r.val_metric, r.test_metric, r.grad_norm);
    }
    println!("SE best val {:.4} at ep {} test_at_best {:.4} elapsed {:.0}s", out.best_val, out.best_epoch, out.test_at_best, t0.elapsed().as_secs_f64());
}

#[test]
#[ignore]
fn full_bsd_lif() {
    let spec = BsdSpec::generate(10, 7).unwrap();
    let data = bsd_generate(&spec, 4000, 7);
    let task = ClassificationTask::<f32>::from_bsd(&data);
    // parameter budget match: SE 256 has 256*(10+256+10) + 4*256 + 10*... compute:
    let se = Network::<f32>::init(desk_arch(NeuronKind::SeAdLif, 256), 1);
    let mut n = 256;
    while Network::<f32>::init(desk_arch(NeuronKind::Lif, n), 1).n_params() < se.n_params() { n += 1; }
    println!("LIF size {n} params {} vs SE {}", Network::<f32>::init(desk_arch(NeuronKind::Lif, n), 1).n_params(), se.n_params());
    let mut net = Network::<f32>::init(desk_arch(NeuronKind::Lif, n), 1);
    let cfg = TrainConfig { epochs: 100, batch_size: 128, lr: 0.006,
        surrogate: SurrogateConfig { alpha: 5.0, c: 0.2 }, ..TrainConfig::default() };
    let t0 = std::time::Instant::now();
    let out = train_classifier(&mut net, &task, &cfg);
    for r in out.log.iter().step_by(5) {
        println!("LIF ep {:3} loss {:.4} val {:.3} test {:.3} gnorm {:.3}", r.epoch, r.train_loss, r.val_metric, r.test_metric, r.grad_norm);
    }
    println!("LIF best val {:.4} at ep {} test_at_best {:.4} elapsed {:.0}s", out.best_val, out.best_epoch, out.test_at_best, t0.elapsed().as_secs_f64());
}
