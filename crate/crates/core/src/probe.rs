//! Gradient-analysis procedures: the state-derivative / input-correlation
//! probe on single sub-threshold neurons, and optimization-based feature
//! visualization of trained networks.

use crate::neuron::{build_discrete_system, NeuronParams, Scheme};
use crate::rng::{self, streams};
use crate::signals::CurrentTrace;
use crate::trainer::{
    backward, forward, loss_and_grad, BurnIn, ForwardOptions, LossKind, Network, Scalar,
    SurrogateConfig, Target,
};
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::Rng;

/// The backward state-to-state sensitivity `d u[T] / d u[k]` for `k = 1..=T`
/// (returned in forward order, so the last entry is 1).
///
/// Computed by reverse accumulation through the state matrix; for a linear
/// system this equals the time-reversed impulse response of `u` to a unit
/// perturbation of `u`.
pub fn state_derivative_trace(params: &NeuronParams, scheme: Scheme, t_steps: usize) -> Vec<f64> {
    let sys = build_discrete_system(params, scheme).expect("valid params");
    let a = sys.a_bar;
    let mut trace = vec![0.0; t_steps];
    // Row vector g = e_u A^(T-k), accumulated right-to-left.
    let mut gu = 1.0;
    let mut gw = 0.0;
    for k in (0..t_steps).rev() {
        trace[k] = gu;
        let new_gu = a[0][0] * gu + a[1][0] * gw;
        let new_gw = a[0][1] * gu + a[1][1] * gw;
        gu = new_gu;
        gw = new_gw;
    }
    trace
}

/// The weight gradient of a single-synapse neuron under a given input
/// current, with a unit loss signal on `u[T]`:
/// `dL/dtheta = sum_k (d u[T] / d I[k]) I[k]`.
pub fn weight_gradient_under_input(
    params: &NeuronParams,
    scheme: Scheme,
    input: &CurrentTrace,
    t_steps: usize,
) -> f64 {
    let sys = build_discrete_system(params, scheme).expect("valid params");
    let a = sys.a_bar;
    let b = sys.b_bar;
    let mut gu = 1.0;
    let mut gw = 0.0;
    let mut acc = 0.0;
    for k in (0..t_steps).rev() {
        // d u[T] / d I[k] through the full input matrix (current channel).
        let sensitivity = b[0][0] * gu + b[1][0] * gw;
        acc += sensitivity * input.values.get(k).copied().unwrap_or(0.0);
        let new_gu = a[0][0] * gu + a[1][0] * gw;
        let new_gw = a[0][1] * gu + a[1][1] * gw;
        gu = new_gu;
        gw = new_gw;
    }
    acc
}

/// Which axes the Gaussian regularizer smooths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SmoothingDims {
    TimeOnly,
    TimeAndSpace,
}

/// Hyperparameters of the optimization-based feature visualization.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisualizationConfig {
    pub n_iter: usize,
    pub step_size: f64,
    /// Sample decay applied together with the smoothing blend.
    pub decay: f64,
    /// Smoothing blend coefficient.
    pub smooth_coeff: f64,
    pub sigma_init: f64,
    pub smoothing: SmoothingDims,
    pub burn_in: BurnIn,
    pub loss: LossKind,
    pub target_class: usize,
    /// Dataset mean rate; when set, the sample mean is renormalized to it
    /// after every iteration.
    pub mean_target: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
}

impl VisualizationConfig {
    pub fn bsd_defaults(target_class: usize, mean_target: f64) -> Self {
        Self {
            n_iter: 400,
            step_size: 0.1,
            decay: 0.891,
            smooth_coeff: 0.1,
            sigma_init: 5.0,
            smoothing: SmoothingDims::TimeOnly,
            burn_in: BurnIn::Fraction(0.8),
            loss: LossKind::SumSoftmaxCe,
            target_class,
            mean_target: Some(mean_target),
            epsilon: 1e-6,
            seed: 0,
        }
    }
}

/// Result of the visualization run.
#[derive(Clone, Debug)]
pub struct VisualizationResult {
    /// Final sample, `t_steps x input_dim`.
    pub sample: Vec<f64>,
    /// Loss before each gradient step (length `n_iter`).
    pub loss_curve: Vec<f64>,
    /// Softmax probability of the target class for the final sample.
    pub target_probability: f64,
}

/// Truncated (+-3 sigma) normalized Gaussian kernel; a delta below half a
/// step width.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma < 0.5 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|s| (-(s as f64) * (s as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= sum;
    }
    kernel
}

/// 1D convolution along time for each channel (zero padding).
fn smooth_time(x: &[f64], t_steps: usize, dim: usize, kernel: &[f64]) -> Vec<f64> {
    if kernel.len() == 1 {
        return x.to_vec();
    }
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; x.len()];
    for c in 0..dim {
        for t in 0..t_steps as i64 {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let src = t + ki as i64 - radius;
                if src >= 0 && src < t_steps as i64 {
                    acc += kv * x[src as usize * dim + c];
                }
            }
            out[t as usize * dim + c] = acc;
        }
    }
    out
}

/// Separable smoothing across channels with the same kernel.
fn smooth_space(x: &[f64], t_steps: usize, dim: usize, kernel: &[f64]) -> Vec<f64> {
    if kernel.len() == 1 {
        return x.to_vec();
    }
    let radius = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; x.len()];
    for t in 0..t_steps {
        for c in 0..dim as i64 {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let src = c + ki as i64 - radius;
                if src >= 0 && src < dim as i64 {
                    acc += kv * x[t * dim + src as usize];
                }
            }
            out[t * dim + c as usize] = acc;
        }
    }
    out
}

/// Gradient-descends an input sample toward a target class on a frozen
/// network: normalized gradient step, clip to nonnegative, Gaussian
/// smoothing with linearly decaying width, optional mean renormalization.
pub fn feature_visualize<T: Scalar>(
    net: &Network<T>,
    t_steps: usize,
    cfg: &VisualizationConfig,
) -> VisualizationResult {
    let net: Network<f64> = net.cast();
    let dim = net.arch().input_dim;
    let n_out = net.arch().outputs;
    let surrogate = SurrogateConfig::default();
    let mut rng = rng::stream(cfg.seed, streams::VISUALIZATION);
    let mut x: Vec<f64> = (0..t_steps * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut loss_curve = Vec::with_capacity(cfg.n_iter);

    for iter in 0..cfg.n_iter {
        let xt: Vec<f64> = x.clone();
        let trace = forward(&net, &xt, t_steps, &ForwardOptions::default())
            .expect("frozen network stays finite on bounded samples");
        let (loss, gy) = loss_and_grad(
            trace.outputs(),
            n_out,
            Target::Class(cfg.target_class),
            cfg.loss,
            cfg.burn_in,
        );
        loss_curve.push(loss);
        let grads = backward(&net, &trace, &gy, &surrogate);
        let g_max = grads.input.iter().fold(0.0f64, |m, &g| m.max(g.abs()));
        let zeta = g_max.max(cfg.epsilon);
        for (xi, &gi) in x.iter_mut().zip(&grads.input) {
            *xi -= cfg.step_size * gi / zeta;
            if *xi < 0.0 {
                *xi = 0.0;
            }
        }
        // Smoothing with linearly decaying kernel width, applied from the
        // first iteration on.
        let sigma = cfg.sigma_init * (1.0 - iter as f64 / cfg.n_iter as f64);
        let kernel = gaussian_kernel(sigma);
        let mut smoothed = smooth_time(&x, t_steps, dim, &kernel);
        if cfg.smoothing == SmoothingDims::TimeAndSpace {
            smoothed = smooth_space(&smoothed, t_steps, dim, &kernel);
        }
        for (xi, si) in x.iter_mut().zip(&smoothed) {
            *xi = cfg.decay * *xi + cfg.smooth_coeff * si;
        }
        if let Some(mu_all) = cfg.mean_target {
            let mu = x.iter().sum::<f64>() / x.len() as f64;
            if mu > 0.0 {
                let scale = mu_all / mu;
                for xi in x.iter_mut() {
                    *xi *= scale;
                }
            }
        }
    }

    // Final readout of the target probability.
    let trace = forward(&net, &x, t_steps, &ForwardOptions::default()).expect("finite");
    let probs = aggregate_softmax(trace.outputs(), n_out, cfg.burn_in.resolve(t_steps));
    VisualizationResult {
        sample: x,
        loss_curve,
        target_probability: probs[cfg.target_class],
    }
}

/// Softmax of the time-summed per-step softmax scores: the network's
/// aggregate class belief.
fn aggregate_softmax(outputs: &[f64], n_out: usize, skip: usize) -> Vec<f64> {
    let t_steps = outputs.len() / n_out;
    let mut z = vec![0.0f64; n_out];
    for k in skip..t_steps {
        let row = &outputs[k * n_out..(k + 1) * n_out];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (zi, &e) in z.iter_mut().zip(&exps) {
            *zi += e / sum;
        }
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{decay_coefficients, step_adlif, DecayForm, NeuronState};
    use crate::signals::{constant_current, wavelet_current};
    use crate::trainer::{LayerSpec, NetworkArch, NeuronKind, TauOut};

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn trace_ends_at_identity() {
        let p = NeuronParams::subthreshold(100.0, 300.0, 300.0, 1.0);
        let trace = state_derivative_trace(&p, Scheme::SymplecticEuler, 50);
        approx(trace[49], 1.0, 0.0);
    }

    #[test]
    fn lif_trace_is_geometric() {
        let p = NeuronParams::subthreshold(25.0, 60.0, 0.0, 1.0);
        let alpha = (-1.0f64 / 25.0).exp();
        let trace = state_derivative_trace(&p, Scheme::SymplecticEuler, 30);
        for (k, &v) in trace.iter().enumerate() {
            approx(v, alpha.powi((29 - k) as i32), 1e-12);
        }
    }

    #[test]
    fn trace_equals_time_reversed_impulse_response() {
        // Forward oracle: perturb u at step k by 1 and roll the dynamics to T.
        let p = NeuronParams::subthreshold(100.0, 300.0, 300.0, 1.0);
        for scheme in [Scheme::SymplecticEuler, Scheme::EulerForward] {
            let t_steps = 120;
            let trace = state_derivative_trace(&p, scheme, t_steps);
            let sys = build_discrete_system(&p, scheme).unwrap();
            let a = sys.a_bar;
            for k in [0usize, 13, 60, 119] {
                let mut u = 1.0;
                let mut w = 0.0;
                for _ in k..t_steps - 1 {
                    let nu = a[0][0] * u + a[0][1] * w;
                    let nw = a[1][0] * u + a[1][1] * w;
                    u = nu;
                    w = nw;
                }
                assert!((trace[k] - u).abs() <= 1e-12, "k={k}: {} vs {u}", trace[k]);
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_gradient() {
        let p = NeuronParams::subthreshold(100.0, 300.0, 300.0, 1.0);
        let z = constant_current(0.0, 330, 1.0);
        assert_eq!(weight_gradient_under_input(&p, Scheme::SymplecticEuler, &z, 330), 0.0);
    }

    #[test]
    fn adlif_constant_input_gradient_vanishes_relative_to_lif() {
        let t = 330;
        let adlif = NeuronParams::subthreshold(100.0, 300.0, 300.0, 1.0);
        let lif = NeuronParams::subthreshold(100.0, 300.0, 0.0, 1.0);
        let drive = constant_current(1.0, t, 1.0);
        let g_ad = weight_gradient_under_input(&adlif, Scheme::SymplecticEuler, &drive, t);
        let g_lif = weight_gradient_under_input(&lif, Scheme::SymplecticEuler, &drive, t);
        assert!(
            g_ad.abs() < 0.1 * g_lif.abs(),
            "constant-input gradients: adLIF {g_ad} vs LIF {g_lif}"
        );
    }

    #[test]
    fn wavelet_gradient_sign_flips_at_half_period() {
        let t = 330;
        let p = NeuronParams::subthreshold(100.0, 300.0, 300.0, 1.0);
        let sys = build_discrete_system(&p, Scheme::SymplecticEuler).unwrap();
        let f = crate::stability::analyze(&sys, 1.0).f_hz;
        let period_ms = 1000.0 / f;
        // Aligned position: scan for the strongest positive correlation.
        let grad_at = |center: f64| {
            let w = wavelet_current(17.0, center, 1.0, t, 1.0);
            weight_gradient_under_input(&p, Scheme::SymplecticEuler, &w, t)
        };
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut center = 2.0 * period_ms;
        while center < t as f64 - period_ms {
            let g = grad_at(center);
            if g > best.1 {
                best = (center, g);
            }
            center += 1.0;
        }
        assert!(best.1 > 0.0);
        let shifted = grad_at(best.0 - period_ms / 2.0);
        assert!(shifted < 0.0, "gradient at -P/2 shift: {shifted}");
    }

    #[test]
    fn probe_matches_trainer_backward_on_single_neuron_net() {
        // One SE-adLIF neuron, one input synapse with weight 1, unit loss on
        // u[T]; the trainer route must agree with the matrix-power route.
        let (tau_u, tau_w, a) = (100.0, 300.0, 300.0);
        let t_steps = 200;
        let drive = wavelet_current(17.0, 100.0, 1.0, t_steps, 1.0);
        let p = NeuronParams::subthreshold(tau_u, tau_w, a, 1.0);
        let g_probe = weight_gradient_under_input(&p, Scheme::SymplecticEuler, &drive, t_steps);

        let mut spec = LayerSpec::new(NeuronKind::SeAdLif, 1, false);
        spec.q = 1.0;
        spec.tau_u_range = [tau_u, tau_u + 1.0];
        spec.tau_w_range = [tau_w, tau_w + 1.0];
        spec.a_hat_range = [a, a];
        spec.b_hat_range = [0.0, 0.0];
        // A vanishing readout time constant makes gamma exactly 0, so the
        // readout passes the hidden membrane potential through unchanged.
        let arch = NetworkArch {
            input_dim: 1,
            layers: vec![spec],
            outputs: 1,
            tau_out: TauOut::Fixed(1e-9),
            theta: f64::INFINITY,
            dt_ms: 1.0,
        };
        let mut net = Network::<f64>::init(arch, 0);
        // Pin the parameters: theta_u = theta_w = 0 selects tau exactly,
        // a_hat is fixed by its degenerate range, the synapse weight is 1.
        let n_params = net.n_params();
        let params = net.params_mut();
        for i in 0..n_params {
            params[i] = 0.0;
        }
        params[0] = 1.0; // w_ff
        // a_hat (after w_ff, theta_u, theta_w come a_hat, b_hat; w_out last)
        let layout_a = net.layout().layers[0].a_hat.clone().unwrap();
        net.params_mut()[layout_a.start] = a;
        let w_out = net.layout().w_out.clone();
        net.params_mut()[w_out.start] = 1.0;

        let trace = forward(&net, &drive.values, t_steps, &ForwardOptions::default()).unwrap();
        // Unit loss signal on y[T] = u[T].
        let mut gy = vec![0.0; t_steps];
        gy[t_steps - 1] = 1.0;
        let grads = backward(&net, &trace, &gy, &SurrogateConfig::default());
        let g_trainer = grads.params[0];
        assert!(
            (g_trainer - g_probe).abs() <= 1e-10 * g_probe.abs().max(1.0),
            "trainer {g_trainer} vs probe {g_probe}"
        );
    }

    #[test]
    fn visualization_constraints_hold_on_flat_network() {
        // A zero network has constant logits: the gradient is ~0 and the
        // sample evolves by smoothing and renormalization only.
        let arch = NetworkArch {
            input_dim: 4,
            layers: vec![LayerSpec::new(NeuronKind::SeAdLif, 6, false)],
            outputs: 3,
            tau_out: TauOut::Fixed(15.0),
            theta: 1.0,
            dt_ms: 1.0,
        };
        let mut net = Network::<f64>::init(arch, 1);
        let zeros = vec![0.0; net.n_params()];
        net.set_params(&zeros);
        let mut cfg = VisualizationConfig::bsd_defaults(1, 0.08);
        cfg.n_iter = 40;
        let result = feature_visualize(&net, 60, &cfg);
        assert!(result.sample.iter().all(|&v| v >= 0.0));
        let mean = result.sample.iter().sum::<f64>() / result.sample.len() as f64;
        approx(mean, 0.08, 1e-6);
        // Flat logits: probability stays at chance.
        approx(result.target_probability, 1.0 / 3.0, 1e-9);
    }

    #[test]
    fn gaussian_kernel_degenerates_to_delta() {
        assert_eq!(gaussian_kernel(0.4), vec![1.0]);
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subthreshold_network_reproduces_neuron_core_trajectory() {
        let (tau_u, tau_w, a) = (25.0, 60.0, 120.0);
        let t_steps = 300;
        let drive = wavelet_current(40.0, 150.0, 0.7, t_steps, 1.0);
        let mut spec = LayerSpec::new(NeuronKind::SeAdLif, 1, false);
        spec.q = 1.0;
        spec.tau_u_range = [tau_u, tau_u];
        spec.tau_w_range = [tau_w, tau_w];
        spec.a_hat_range = [a, a];
        spec.b_hat_range = [0.0, 0.0];
        let arch = NetworkArch {
            input_dim: 1,
            layers: vec![spec],
            outputs: 1,
            tau_out: TauOut::Fixed(15.0),
            theta: f64::INFINITY,
            dt_ms: 1.0,
        };
        let mut net = Network::<f64>::init(arch, 0);
        let n = net.n_params();
        let zeros = vec![0.0; n];
        net.set_params(&zeros);
        net.params_mut()[0] = 1.0;
        let a_range = net.layout().layers[0].a_hat.clone().unwrap();
        net.params_mut()[a_range.start] = a;

        let trace = forward(&net, &drive.values, t_steps, &ForwardOptions::default()).unwrap();
        let p = NeuronParams::subthreshold(tau_u, tau_w, a, 1.0);
        let coeffs = decay_coefficients(&p, DecayForm::Exponential).unwrap();
        let mut state = NeuronState::default();
        for k in 0..t_steps {
            state = step_adlif(state, drive.values[k], &coeffs, &p, Scheme::SymplecticEuler).state;
            assert!((trace.layers[0].u[k] - state.u).abs() <= 1e-12, "step {k}");
            assert!((trace.layers[0].w[k] - state.w).abs() <= 1e-12, "step {k}");
        }
    }
}
