//! Finite-difference verification of the reverse-mode gradients.
//!
//! Sub-threshold networks are smooth, so central differences on every single
//! parameter are an exact independent oracle for the BPTT implementation,
//! including the reparameterization chain rules, recurrence, multi-layer
//! feedback and the closed-loop (autoregressive) input path.

use adlif_core::trainer::{
    backward, forward, loss_and_grad, BurnIn, ForwardOptions, LayerSpec, LossKind, Network,
    NetworkArch, NeuronKind, SurrogateConfig, Target, TauOut,
};

fn arch(kinds: &[NeuronKind], size: usize, input_dim: usize, outputs: usize, theta: f64) -> NetworkArch {
    NetworkArch {
        input_dim,
        layers: kinds
            .iter()
            .map(|&kind| {
                let mut spec = LayerSpec::new(kind, size, true);
                spec.q = 120.0;
                spec
            })
            .collect(),
        outputs,
        tau_out: TauOut::Trainable([1.0, 20.0]),
        theta,
        dt_ms: 1.0,
    }
}

fn test_input(t_steps: usize, dim: usize) -> Vec<f64> {
    (0..t_steps * dim)
        .map(|i| ((i as f64 * 0.61).sin() + 0.3 * (i as f64 * 0.173).cos()) * 0.8)
        .collect()
}

/// Loss of the network as a function of its flat parameters.
fn loss_of(
    net: &Network<f64>,
    input: &[f64],
    t_steps: usize,
    opts: &ForwardOptions,
    target: Target<'_, f64>,
    kind: LossKind,
    burn_in: BurnIn,
) -> f64 {
    let trace = forward(net, input, t_steps, opts).expect("finite");
    loss_and_grad(trace.outputs(), net.arch().outputs, target, kind, burn_in).0
}

fn check_against_fd(
    arch: NetworkArch,
    t_steps: usize,
    opts: ForwardOptions,
    kind: LossKind,
    dense_target: Option<Vec<f64>>,
    tol: f64,
) {
    let mut net = Network::<f64>::init(arch, 42);
    let input = test_input(t_steps, net.arch().input_dim);
    let burn_in = BurnIn::Steps(2);
    fn target_of<'a>(dense: &'a Option<Vec<f64>>) -> Target<'a, f64> {
        match dense {
            Some(t) => Target::Dense(t),
            None => Target::Class(1),
        }
    }

    let trace = forward(&net, &input, t_steps, &opts).expect("finite");
    let (_, gy) = loss_and_grad(
        trace.outputs(),
        net.arch().outputs,
        target_of(&dense_target),
        kind,
        burn_in,
    );
    let grads = backward(&net, &trace, &gy, &SurrogateConfig::default());

    let mut worst = (0.0f64, usize::MAX);
    for i in 0..net.n_params() {
        let p0 = net.params()[i];
        // Near-optimal central-difference step for ~1e-14 effective noise in
        // the loss; smaller steps drown small gradients in cancellation.
        let h = 1e-4 * p0.abs().max(1.0);
        net.params_mut()[i] = p0 + h;
        let lp = loss_of(&net, &input, t_steps, &opts, target_of(&dense_target), kind, burn_in);
        net.params_mut()[i] = p0 - h;
        let lm = loss_of(&net, &input, t_steps, &opts, target_of(&dense_target), kind, burn_in);
        net.params_mut()[i] = p0;
        let fd = (lp - lm) / (2.0 * h);
        let got = grads.params[i];
        let rel = (got - fd).abs() / fd.abs().max(1e-4);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    assert!(
        worst.0 < tol,
        "worst relative gradient error {} at parameter {} (of {})",
        worst.0,
        worst.1,
        net.n_params()
    );
}

#[test]
fn se_adlif_two_layer_gradients_match_fd() {
    check_against_fd(
        arch(&[NeuronKind::SeAdLif, NeuronKind::SeAdLif], 8, 3, 2, f64::INFINITY),
        50,
        ForwardOptions::default(),
        LossKind::SumSoftmaxCe,
        None,
        1e-5,
    );
}

#[test]
fn ef_adlif_gradients_match_fd() {
    check_against_fd(
        arch(&[NeuronKind::EfAdLif], 8, 3, 2, f64::INFINITY),
        50,
        ForwardOptions::default(),
        LossKind::SumSoftmaxCe,
        None,
        1e-5,
    );
}

#[test]
fn lif_gradients_match_fd() {
    check_against_fd(
        arch(&[NeuronKind::Lif], 8, 3, 2, f64::INFINITY),
        50,
        ForwardOptions::default(),
        LossKind::SoftmaxSumCe,
        None,
        1e-5,
    );
}

#[test]
fn three_layer_mixed_gradients_match_fd() {
    check_against_fd(
        arch(
            &[NeuronKind::SeAdLif, NeuronKind::Lif, NeuronKind::EfAdLif],
            8,
            3,
            2,
            f64::INFINITY,
        ),
        50,
        ForwardOptions::default(),
        LossKind::SumSoftmaxCe,
        None,
        1e-5,
    );
}

#[test]
fn closed_loop_gradients_match_fd() {
    // The autoregressive feedback routes output adjoints back into the input
    // path; finite differences see exactly the same composite function.
    let t_steps = 30;
    let dense: Vec<f64> = (0..t_steps * 3).map(|i| (i as f64 * 0.21).sin() * 0.4).collect();
    check_against_fd(
        arch(&[NeuronKind::SeAdLif], 8, 3, 3, f64::INFINITY),
        t_steps,
        ForwardOptions { autoregress_from: Some(t_steps / 2), dropout: None },
        LossKind::Mse,
        Some(dense),
        1e-5,
    );
}

#[test]
fn mse_regression_gradients_match_fd() {
    let t_steps = 40;
    let dense: Vec<f64> = (0..t_steps * 2).map(|i| (i as f64 * 0.13).cos() * 0.5).collect();
    check_against_fd(
        arch(&[NeuronKind::SeAdLif], 6, 2, 2, f64::INFINITY),
        t_steps,
        ForwardOptions::default(),
        LossKind::Mse,
        Some(dense),
        1e-5,
    );
}

#[test]
fn input_gradients_match_fd() {
    let a = arch(&[NeuronKind::SeAdLif, NeuronKind::SeAdLif], 6, 3, 2, f64::INFINITY);
    let net = Network::<f64>::init(a, 7);
    let t_steps = 25;
    let mut input = test_input(t_steps, 3);
    let opts = ForwardOptions::default();
    let burn_in = BurnIn::Steps(0);
    let trace = forward(&net, &input, t_steps, &opts).unwrap();
    let (_, gy) = loss_and_grad(trace.outputs(), 2, Target::Class(0), LossKind::SumSoftmaxCe, burn_in);
    let grads = backward(&net, &trace, &gy, &SurrogateConfig::default());
    for i in (0..input.len()).step_by(7) {
        let x0 = input[i];
        let h = 1e-6;
        input[i] = x0 + h;
        let lp = loss_of(&net, &input, t_steps, &opts, Target::Class(0), LossKind::SumSoftmaxCe, burn_in);
        input[i] = x0 - h;
        let lm = loss_of(&net, &input, t_steps, &opts, Target::Class(0), LossKind::SumSoftmaxCe, burn_in);
        input[i] = x0;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (grads.input[i] - fd).abs() / fd.abs().max(1e-6);
        assert!(rel < 1e-5, "input grad {i}: {} vs fd {fd}", grads.input[i]);
    }
}

#[test]
fn surrogate_value_at_threshold() {
    let cfg = SurrogateConfig { alpha: 5.0, c: 0.4 };
    assert!((cfg.derivative(0.0f64) - 1.0).abs() < 1e-15);
}

#[test]
fn zero_loss_gradient_gives_zero_parameter_gradients() {
    let a = arch(&[NeuronKind::SeAdLif], 8, 3, 2, 1.0);
    let net = Network::<f64>::init(a, 3);
    let t_steps = 40;
    let input: Vec<f64> = test_input(t_steps, 3).iter().map(|x| x * 5.0).collect();
    let trace = forward(&net, &input, t_steps, &ForwardOptions::default()).unwrap();
    let gy = vec![0.0; t_steps * 2];
    let grads = backward(&net, &trace, &gy, &SurrogateConfig::default());
    assert!(grads.params.iter().all(|&g| g == 0.0));
    assert!(grads.input.iter().all(|&g| g == 0.0));
}

#[test]
fn forward_is_deterministic_across_identical_samples() {
    let a = arch(&[NeuronKind::SeAdLif], 16, 3, 2, 1.0);
    let net = Network::<f64>::init(a, 9);
    let input = test_input(60, 3);
    let t1 = forward(&net, &input, 60, &ForwardOptions::default()).unwrap();
    let t2 = forward(&net, &input, 60, &ForwardOptions::default()).unwrap();
    assert_eq!(t1.y, t2.y);
    assert_eq!(t1.layers[0].out, t2.layers[0].out);
}

#[test]
fn zero_input_zero_state_gives_zero_output() {
    let a = arch(&[NeuronKind::SeAdLif, NeuronKind::SeAdLif], 8, 3, 2, 1.0);
    let net = Network::<f64>::init(a, 5);
    let input = vec![0.0; 50 * 3];
    let trace = forward(&net, &input, 50, &ForwardOptions::default()).unwrap();
    assert!(trace.y.iter().all(|&y| y == 0.0));
}
