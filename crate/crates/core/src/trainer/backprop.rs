//! Recorded forward pass and exact reverse-mode gradients.
//!
//! The forward pass stores every per-step quantity the backward pass needs
//! (input currents, pre- and post-reset potentials, adaptation currents,
//! layer outputs); the backward pass walks steps in reverse, layers from top
//! to bottom, carrying the state adjoints. The spike nonlinearity uses the
//! SLAYER pseudo-derivative and the reset factor is detached (treated as a
//! constant in the backward pass).

use super::net::{Network, NeuronKind, TauOut};
use super::{sc, Scalar};
use crate::rng;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::Rng;

/// SLAYER surrogate-gradient shape: `dS/dv = c a / (2 exp(a |v|))`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateConfig {
    pub alpha: f64,
    pub c: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { alpha: 5.0, c: 0.4 }
    }
}

impl SurrogateConfig {
    /// Pseudo-derivative at membrane distance `v` from threshold.
    pub fn derivative<T: Scalar>(&self, v: T) -> T {
        let half = sc::<T>(self.c * self.alpha / 2.0);
        let a = sc::<T>(self.alpha);
        half * (-a * v.abs()).exp()
    }
}

/// Train-time Bernoulli masking of spikes passed to the next layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutPlan {
    pub rate: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Per-call forward options.
#[derive(Clone, Copy, Debug, Default)]
pub struct ForwardOptions {
    /// From this step on, the network input is its own previous-step output
    /// (requires `outputs == input_dim`).
    pub autoregress_from: Option<usize>,
    pub dropout: Option<DropoutPlan>,
}

/// Forward pass hit a non-finite activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonFiniteActivation {
    pub layer: usize,
    pub step: usize,
}

impl fmt::Display for NonFiniteActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite activation in layer {} at step {}", self.layer, self.step)
    }
}

impl core::error::Error for NonFiniteActivation {}

/// Recorded per-layer forward quantities, each flattened `t_steps x size`.
#[derive(Clone, Debug)]
pub struct LayerTrace<T> {
    pub i_cur: Vec<T>,
    pub u_hat: Vec<T>,
    pub u: Vec<T>,
    /// Adaptation current; empty for LIF layers.
    pub w: Vec<T>,
    /// Layer output: spikes, or the membrane potential in sub-threshold mode.
    pub out: Vec<T>,
    /// Dropout mask (0 or 1/(1-rate)); empty when dropout is off.
    pub mask: Vec<T>,
}

/// Full recorded forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub t_steps: usize,
    /// Effective network input per step (fed-back predictions included).
    pub x_eff: Vec<T>,
    pub layers: Vec<LayerTrace<T>>,
    pub i_out: Vec<T>,
    /// Readout outputs, `t_steps x outputs`.
    pub y: Vec<T>,
    pub autoregress_from: Option<usize>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn outputs(&self) -> &[T] {
        &self.y
    }
}

/// Gradients aligned with the network's flat parameter vector, plus the
/// gradient with respect to the (effective) input sequence.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub params: Vec<T>,
    pub input: Vec<T>,
}

/// Per-layer derived coefficients and their reparameterization slopes.
pub(super) struct LayerCoeffs<T> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub dalpha_dtheta: Vec<T>,
    pub dbeta_dtheta: Vec<T>,
}

pub(super) fn layer_coeffs<T: Scalar>(net: &Network<T>, layer: usize) -> LayerCoeffs<T> {
    let spec = &net.arch().layers[layer];
    let dt = net.arch().dt_ms;
    let n = spec.size;
    let mut c = LayerCoeffs {
        alpha: vec![T::zero(); n],
        beta: vec![T::zero(); n],
        a: vec![T::zero(); n],
        b: vec![T::zero(); n],
        dalpha_dtheta: vec![T::zero(); n],
        dbeta_dtheta: vec![T::zero(); n],
    };
    for i in 0..n {
        let (tau_u, tau_w, a, b) = net.neuron_parameters(layer, i);
        let alpha = (-dt / tau_u).exp();
        c.alpha[i] = sc(alpha);
        c.dalpha_dtheta[i] =
            sc(alpha * dt / (tau_u * tau_u) * (spec.tau_u_range[1] - spec.tau_u_range[0]));
        if spec.kind.is_adaptive() {
            let beta = (-dt / tau_w).exp();
            c.beta[i] = sc(beta);
            c.dbeta_dtheta[i] =
                sc(beta * dt / (tau_w * tau_w) * (spec.tau_w_range[1] - spec.tau_w_range[0]));
            c.a[i] = sc(a);
            c.b[i] = sc(b);
        }
    }
    c
}

/// Readout decay and its reparameterization slope.
pub(super) fn readout_gamma<T: Scalar>(net: &Network<T>) -> (T, T) {
    let dt = net.arch().dt_ms;
    let tau = net.tau_out();
    let gamma = (-dt / tau).exp();
    let slope = match net.arch().tau_out {
        TauOut::Fixed(_) => 0.0,
        TauOut::Trainable([lo, hi]) => gamma * dt / (tau * tau) * (hi - lo),
    };
    (sc(gamma), sc(slope))
}

/// `out[i] += a * x[i]`; the workhorse the compiler vectorizes.
#[inline]
fn axpy<T: Scalar>(out: &mut [T], a: T, x: &[T]) {
    for (o, &xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
}

/// Eight-lane dot product (fixed association order, vectorizable).
#[inline]
pub(super) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for lane in 0..8 {
            acc[lane] += xa[lane] * xb[lane];
        }
    }
    let mut tail = T::zero();
    for (&xa, &xb) in ca.remainder().iter().zip(cb.remainder()) {
        tail += xa * xb;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Accumulates `out += W^T x` for an input-major `fan_in x n` weight block,
/// skipping zero inputs (spike trains are sparse).
#[inline]
fn accumulate_input<T: Scalar>(out: &mut [T], w: &[T], x: &[T]) {
    let n = out.len();
    for (j, &xj) in x.iter().enumerate() {
        if xj != T::zero() {
            axpy(out, xj, &w[j * n..(j + 1) * n]);
        }
    }
}

/// Runs the recorded forward pass.
pub fn forward<T: Scalar>(
    net: &Network<T>,
    input: &[T],
    t_steps: usize,
    opts: &ForwardOptions,
) -> Result<ForwardTrace<T>, NonFiniteActivation> {
    let arch = net.arch();
    let d = arch.input_dim;
    let c_out = arch.outputs;
    assert!(input.len() >= t_steps * d, "input shorter than t_steps x input_dim");
    if opts.autoregress_from.is_some() {
        assert_eq!(c_out, d, "closed-loop mode needs outputs == input_dim");
    }
    let theta_inf = arch.theta.is_infinite();
    let theta = sc::<T>(arch.theta);
    let n_layers = arch.layers.len();
    let coeffs: Vec<LayerCoeffs<T>> = (0..n_layers).map(|l| layer_coeffs(net, l)).collect();
    let (gamma, _) = readout_gamma(net);

    let mut layers: Vec<LayerTrace<T>> = arch
        .layers
        .iter()
        .map(|spec| {
            let len = t_steps * spec.size;
            LayerTrace {
                i_cur: vec![T::zero(); len],
                u_hat: vec![T::zero(); len],
                u: vec![T::zero(); len],
                w: if spec.kind.is_adaptive() { vec![T::zero(); len] } else { Vec::new() },
                out: vec![T::zero(); len],
                mask: Vec::new(),
            }
        })
        .collect();
    // Dropout masks are drawn up front so the forward loop stays branch-light.
    if let Some(plan) = &opts.dropout {
        if plan.rate > 0.0 {
            let mut mask_rng = rng::stream(plan.seed, plan.stream);
            let keep = 1.0 - plan.rate;
            let scale = sc::<T>(1.0 / keep);
            for trace in &mut layers {
                trace.mask = (0..trace.out.len())
                    .map(|_| if mask_rng.gen::<f64>() < keep { scale } else { T::zero() })
                    .collect();
            }
        }
    }

    let mut x_eff = vec![T::zero(); t_steps * d];
    let mut i_out = vec![T::zero(); t_steps * c_out];
    let mut y = vec![T::zero(); t_steps * c_out];
    let mut masked_buf: Vec<T> = Vec::new();

    for k in 0..t_steps {
        // Effective input: teacher signal or own previous prediction.
        let closed_loop = opts.autoregress_from.map_or(false, |k0| k >= k0);
        if closed_loop && k > 0 {
            let (head, tail) = x_eff.split_at_mut(k * d);
            tail[..d].copy_from_slice(&y[(k - 1) * c_out..k * c_out]);
            let _ = head;
        } else {
            x_eff[k * d..(k + 1) * d].copy_from_slice(&input[k * d..(k + 1) * d]);
        }

        for l in 0..n_layers {
            let spec = &arch.layers[l];
            let n = spec.size;
            let ll = &net.layout().layers[l];
            let row = k * n;
            // Input current: feed-forward from below plus own recurrent
            // spikes from the previous step.
            let (lower, current) = layers.split_at_mut(l);
            let trace = &mut current[0];
            {
                let i_slice = &mut trace.i_cur[row..row + n];
                let w_ff = &net.params()[ll.w_ff.clone()];
                if l == 0 {
                    accumulate_input(i_slice, w_ff, &x_eff[k * d..(k + 1) * d]);
                } else {
                    let below = &lower[l - 1];
                    let n_below = arch.layers[l - 1].size;
                    let src = &below.out[k * n_below..(k + 1) * n_below];
                    if below.mask.is_empty() {
                        accumulate_input(i_slice, w_ff, src);
                    } else {
                        let m = &below.mask[k * n_below..(k + 1) * n_below];
                        masked_buf.clear();
                        masked_buf.extend(src.iter().zip(m).map(|(&s, &mv)| s * mv));
                        accumulate_input(i_slice, w_ff, &masked_buf);
                    }
                }
                if let (Some(wr), true) = (&ll.w_rec, k > 0) {
                    let w_rec = &net.params()[wr.clone()];
                    let prev_out = &trace.out[(k - 1) * n..k * n];
                    // Split borrow: copy the previous outputs first.
                    masked_buf.clear();
                    masked_buf.extend_from_slice(prev_out);
                    accumulate_input(&mut trace.i_cur[row..row + n], w_rec, &masked_buf);
                }
            }

            // State update.
            let lc = &coeffs[l];
            let mut finite = true;
            match (spec.kind.is_adaptive(), theta_inf) {
                (true, false) => {
                    let scheme_se = spec.kind == NeuronKind::SeAdLif;
                    for i in 0..n {
                        let (u_prev, w_prev) = if k > 0 {
                            (trace.u[row - n + i], trace.w[row - n + i])
                        } else {
                            (T::zero(), T::zero())
                        };
                        let alpha = lc.alpha[i];
                        let u_hat = alpha * u_prev
                            + (T::one() - alpha) * (trace.i_cur[row + i] - w_prev);
                        let spike = u_hat > theta;
                        let u = if spike { T::zero() } else { u_hat };
                        let s = if spike { T::one() } else { T::zero() };
                        let beta = lc.beta[i];
                        let u_for_w = if scheme_se { u } else { u_prev };
                        let w = beta * w_prev
                            + (T::one() - beta) * (lc.a[i] * u_for_w + lc.b[i] * s);
                        trace.u_hat[row + i] = u_hat;
                        trace.u[row + i] = u;
                        trace.w[row + i] = w;
                        trace.out[row + i] = s;
                        finite &= u.is_finite() && w.is_finite();
                    }
                }
                (true, true) => {
                    let scheme_se = spec.kind == NeuronKind::SeAdLif;
                    for i in 0..n {
                        let (u_prev, w_prev) = if k > 0 {
                            (trace.u[row - n + i], trace.w[row - n + i])
                        } else {
                            (T::zero(), T::zero())
                        };
                        let alpha = lc.alpha[i];
                        let u_hat = alpha * u_prev
                            + (T::one() - alpha) * (trace.i_cur[row + i] - w_prev);
                        let beta = lc.beta[i];
                        let u_for_w = if scheme_se { u_hat } else { u_prev };
                        let w = beta * w_prev + (T::one() - beta) * (lc.a[i] * u_for_w);
                        trace.u_hat[row + i] = u_hat;
                        trace.u[row + i] = u_hat;
                        trace.w[row + i] = w;
                        trace.out[row + i] = u_hat;
                        finite &= u_hat.is_finite() && w.is_finite();
                    }
                }
                (false, false) => {
                    for i in 0..n {
                        let u_prev = if k > 0 { trace.u[row - n + i] } else { T::zero() };
                        let alpha = lc.alpha[i];
                        let u_hat =
                            alpha * u_prev + (T::one() - alpha) * trace.i_cur[row + i];
                        let spike = u_hat > theta;
                        let u = if spike { T::zero() } else { u_hat };
                        trace.u_hat[row + i] = u_hat;
                        trace.u[row + i] = u;
                        trace.out[row + i] = if spike { T::one() } else { T::zero() };
                        finite &= u.is_finite();
                    }
                }
                (false, true) => {
                    for i in 0..n {
                        let u_prev = if k > 0 { trace.u[row - n + i] } else { T::zero() };
                        let alpha = lc.alpha[i];
                        let u_hat =
                            alpha * u_prev + (T::one() - alpha) * trace.i_cur[row + i];
                        trace.u_hat[row + i] = u_hat;
                        trace.u[row + i] = u_hat;
                        trace.out[row + i] = u_hat;
                        finite &= u_hat.is_finite();
                    }
                }
            }
            if !finite {
                return Err(NonFiniteActivation { layer: l, step: k });
            }
        }

        // Readout.
        let last = &layers[n_layers - 1];
        let n_last = arch.layers[n_layers - 1].size;
        let w_out = &net.params()[net.layout().w_out.clone()];
        {
            let io = &mut i_out[k * c_out..(k + 1) * c_out];
            let src = &last.out[k * n_last..(k + 1) * n_last];
            if last.mask.is_empty() {
                accumulate_input(io, w_out, src);
            } else {
                let m = &last.mask[k * n_last..(k + 1) * n_last];
                masked_buf.clear();
                masked_buf.extend(src.iter().zip(m).map(|(&s, &mv)| s * mv));
                accumulate_input(io, w_out, &masked_buf);
            }
        }
        for c in 0..c_out {
            let y_prev = if k > 0 { y[(k - 1) * c_out + c] } else { T::zero() };
            y[k * c_out + c] = gamma * y_prev + (T::one() - gamma) * i_out[k * c_out + c];
        }
    }

    Ok(ForwardTrace {
        t_steps,
        x_eff,
        layers,
        i_out,
        y,
        autoregress_from: opts.autoregress_from,
    })
}

/// Exact reverse-mode pass through a recorded trace.
///
/// `gy` is the loss gradient with respect to the readout outputs
/// (`t_steps x outputs`).
pub fn backward<T: Scalar>(
    net: &Network<T>,
    trace: &ForwardTrace<T>,
    gy: &[T],
    surrogate: &SurrogateConfig,
) -> Gradients<T> {
    let arch = net.arch();
    let layout = net.layout();
    let t_steps = trace.t_steps;
    let d = arch.input_dim;
    let c_out = arch.outputs;
    assert_eq!(gy.len(), t_steps * c_out);
    let theta_inf = arch.theta.is_infinite();
    let theta = sc::<T>(arch.theta);
    let n_layers = arch.layers.len();
    let coeffs: Vec<LayerCoeffs<T>> = (0..n_layers).map(|l| layer_coeffs(net, l)).collect();
    let (gamma, dgamma_dtheta) = readout_gamma(net);

    let mut grads = vec![T::zero(); net.n_params()];
    let mut input_grad = vec![T::zero(); t_steps * d];

    // Adjoint carries.
    let mut carry_u: Vec<Vec<T>> =
        arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut carry_w: Vec<Vec<T>> =
        arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut rec_carry: Vec<Vec<T>> =
        arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut carry_y = vec![T::zero(); c_out];
    // Scratch: g_out assembled per layer, GI per layer, feedback buffer.
    let mut g_out: Vec<Vec<T>> = arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut gi: Vec<Vec<T>> = arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    // Per-coefficient accumulators, mapped through the reparameterization at
    // the end.
    let mut g_alpha: Vec<Vec<T>> =
        arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut g_beta: Vec<Vec<T>> =
        arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut g_a: Vec<Vec<T>> = arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut g_b: Vec<Vec<T>> = arch.layers.iter().map(|s| vec![T::zero(); s.size]).collect();
    let mut g_gamma = T::zero();
    let mut gy_total = vec![T::zero(); c_out];
    let mut gi_out = vec![T::zero(); c_out];
    let mut masked_buf: Vec<T> = Vec::new();

    let n_last = arch.layers[n_layers - 1].size;
    for k in (0..t_steps).rev() {
        // Readout adjoint; closed-loop feedback re-routes next-step input
        // gradients onto the previous outputs.
        let closed_next = trace
            .autoregress_from
            .map_or(false, |k0| k + 1 >= k0.max(1) && k + 1 < t_steps);
        for c in 0..c_out {
            let mut g = gy[k * c_out + c] + gamma * carry_y[c];
            if closed_next {
                g += input_grad[(k + 1) * d + c];
            }
            gy_total[c] = g;
            gi_out[c] = (T::one() - gamma) * g;
        }
        let w_out = &net.params()[layout.w_out.clone()];
        {
            let last = &trace.layers[n_layers - 1];
            let out_row = &last.out[k * n_last..(k + 1) * n_last];
            for c in 0..c_out {
                let y_prev = if k > 0 { trace.y[(k - 1) * c_out + c] } else { T::zero() };
                g_gamma += gy_total[c] * (y_prev - trace.i_out[k * c_out + c]);
            }
            let gw_out = &mut grads[layout.w_out.clone()];
            if last.mask.is_empty() {
                for (j, &oj) in out_row.iter().enumerate() {
                    if oj != T::zero() {
                        axpy(&mut gw_out[j * c_out..(j + 1) * c_out], oj, &gi_out);
                    }
                }
                for j in 0..n_last {
                    g_out[n_layers - 1][j] = dot(&w_out[j * c_out..(j + 1) * c_out], &gi_out);
                }
            } else {
                let mask_row = &last.mask[k * n_last..(k + 1) * n_last];
                for j in 0..n_last {
                    let mj = out_row[j] * mask_row[j];
                    if mj != T::zero() {
                        axpy(&mut gw_out[j * c_out..(j + 1) * c_out], mj, &gi_out);
                    }
                }
                for j in 0..n_last {
                    g_out[n_layers - 1][j] =
                        mask_row[j] * dot(&w_out[j * c_out..(j + 1) * c_out], &gi_out);
                }
            }
        }
        carry_y.copy_from_slice(&gy_total);

        for l in (0..n_layers).rev() {
            let spec = &arch.layers[l];
            let n = spec.size;
            let ll = &layout.layers[l];
            let ltrace = &trace.layers[l];
            let row = k * n;
            let lc = &coeffs[l];
            // Recurrent feedback from step k+1 joins the assembled output
            // adjoint (unmasked path).
            for j in 0..n {
                g_out[l][j] += rec_carry[l][j];
                rec_carry[l][j] = T::zero();
            }

            let adaptive = spec.kind.is_adaptive();
            let scheme_se = spec.kind == NeuronKind::SeAdLif;
            for i in 0..n {
                let alpha = lc.alpha[i];
                let (u_prev, w_prev) = if k > 0 {
                    (
                        ltrace.u[row - n + i],
                        if adaptive { ltrace.w[row - n + i] } else { T::zero() },
                    )
                } else {
                    (T::zero(), T::zero())
                };
                let gw_total = if adaptive { carry_w[l][i] } else { T::zero() };
                let (g_u_hat, u_for_w) = if theta_inf {
                    // Sub-threshold mode: out = u = u_hat; no spikes.
                    let mut gu = carry_u[l][i] + g_out[l][i];
                    if adaptive && scheme_se {
                        gu += (T::one() - lc.beta[i]) * lc.a[i] * gw_total;
                    }
                    (gu, if scheme_se { ltrace.u_hat[row + i] } else { u_prev })
                } else {
                    let u_hat = ltrace.u_hat[row + i];
                    let spiked = ltrace.out[row + i] != T::zero();
                    let mut gs = g_out[l][i];
                    if adaptive {
                        gs += (T::one() - lc.beta[i]) * lc.b[i] * gw_total;
                    }
                    let mut gu = carry_u[l][i];
                    if adaptive && scheme_se {
                        gu += (T::one() - lc.beta[i]) * lc.a[i] * gw_total;
                    }
                    let reset_factor = if spiked { T::zero() } else { T::one() };
                    let g_u_hat =
                        gu * reset_factor + gs * surrogate.derivative(u_hat - theta);
                    (g_u_hat, if scheme_se { ltrace.u[row + i] } else { u_prev })
                };

                // Coefficient gradients.
                let i_k = ltrace.i_cur[row + i];
                if adaptive {
                    g_alpha[l][i] += g_u_hat * (u_prev + w_prev - i_k);
                    let s_k = if theta_inf { T::zero() } else { ltrace.out[row + i] };
                    g_beta[l][i] +=
                        gw_total * (w_prev - (lc.a[i] * u_for_w + lc.b[i] * s_k));
                    let bb = T::one() - lc.beta[i];
                    g_a[l][i] += gw_total * bb * u_for_w;
                    g_b[l][i] += gw_total * bb * s_k;
                } else {
                    g_alpha[l][i] += g_u_hat * (u_prev - i_k);
                }

                // Carries toward step k-1.
                let mut cu = alpha * g_u_hat;
                let mut cw = T::zero();
                if adaptive {
                    cw = lc.beta[i] * gw_total - (T::one() - alpha) * g_u_hat;
                    if !scheme_se {
                        cu += (T::one() - lc.beta[i]) * lc.a[i] * gw_total;
                    }
                }
                carry_u[l][i] = cu;
                carry_w[l][i] = cw;
                gi[l][i] = (T::one() - alpha) * g_u_hat;
                g_out[l][i] = T::zero();
            }

            // Weight gradients and downstream feedback.
            let gi_row = &gi[l];
            {
                let w_ff = &net.params()[ll.w_ff.clone()];
                if l == 0 {
                    let x_row = &trace.x_eff[k * d..(k + 1) * d];
                    {
                        let gw_ff = &mut grads[ll.w_ff.clone()];
                        for (j, &xj) in x_row.iter().enumerate() {
                            if xj != T::zero() {
                                axpy(&mut gw_ff[j * n..(j + 1) * n], xj, gi_row);
                            }
                        }
                    }
                    for j in 0..d {
                        input_grad[k * d + j] = dot(&w_ff[j * n..(j + 1) * n], gi_row);
                    }
                } else {
                    let below = &trace.layers[l - 1];
                    let n_below = arch.layers[l - 1].size;
                    let out_row = &below.out[k * n_below..(k + 1) * n_below];
                    masked_buf.clear();
                    if below.mask.is_empty() {
                        masked_buf.extend_from_slice(out_row);
                    } else {
                        let m = &below.mask[k * n_below..(k + 1) * n_below];
                        masked_buf.extend(out_row.iter().zip(m).map(|(&s, &mv)| s * mv));
                    }
                    {
                        let gw_ff = &mut grads[ll.w_ff.clone()];
                        for (j, &xj) in masked_buf.iter().enumerate() {
                            if xj != T::zero() {
                                axpy(&mut gw_ff[j * n..(j + 1) * n], xj, gi_row);
                            }
                        }
                    }
                    if below.mask.is_empty() {
                        for j in 0..n_below {
                            g_out[l - 1][j] += dot(&w_ff[j * n..(j + 1) * n], gi_row);
                        }
                    } else {
                        let m = &below.mask[k * n_below..(k + 1) * n_below];
                        for j in 0..n_below {
                            g_out[l - 1][j] += m[j] * dot(&w_ff[j * n..(j + 1) * n], gi_row);
                        }
                    }
                }
            }
            if let Some(wr) = &ll.w_rec {
                if k > 0 {
                    let prev_out = &ltrace.out[(k - 1) * n..k * n];
                    {
                        let gw_rec = &mut grads[wr.clone()];
                        for (j, &oj) in prev_out.iter().enumerate() {
                            if oj != T::zero() {
                                axpy(&mut gw_rec[j * n..(j + 1) * n], oj, gi_row);
                            }
                        }
                    }
                    let w_rec = &net.params()[wr.clone()];
                    for j in 0..n {
                        rec_carry[l][j] = dot(&w_rec[j * n..(j + 1) * n], gi_row);
                    }
                }
            }
        }
    }

    // Map coefficient gradients through the reparameterizations.
    for (l, (spec, ll)) in arch.layers.iter().zip(&layout.layers).enumerate() {
        let lc = &coeffs[l];
        let q = sc::<T>(spec.q);
        for i in 0..spec.size {
            grads[ll.theta_u.start + i] += g_alpha[l][i] * lc.dalpha_dtheta[i];
        }
        if let Some(r) = &ll.theta_w {
            for i in 0..spec.size {
                grads[r.start + i] += g_beta[l][i] * lc.dbeta_dtheta[i];
            }
        }
        if let Some(r) = &ll.a_hat {
            for i in 0..spec.size {
                grads[r.start + i] += q * g_a[l][i];
            }
        }
        if let Some(r) = &ll.b_hat {
            for i in 0..spec.size {
                grads[r.start + i] += q * g_b[l][i];
            }
        }
    }
    if let Some(idx) = layout.theta_out {
        grads[idx] += g_gamma * dgamma_dtheta;
    }

    Gradients { params: grads, input: input_grad }
}
