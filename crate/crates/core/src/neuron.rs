//! Neuron parameterizations and discrete-time forward dynamics.
//!
//! The adaptive LIF neuron couples a membrane potential `u` with an
//! adaptation current `w`:
//!
//! ```text
//! tau_u du/dt = -u - w + I
//! tau_w dw/dt = -w + a*u + b*z
//! ```
//!
//! This module provides the Euler-Forward and Symplectic-Euler single-step
//! updates (including threshold and reset), the corresponding discrete
//! state-space matrices, plus matrix-exponential and bilinear discretizations
//! used as reference solutions. A reduced damped-harmonic-oscillator neuron
//! (BHRF) is included for the discretization comparison on a second model
//! family.

use crate::linalg::{expm, Mat};
use alloc::string::String;
use core::fmt;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

/// Errors from constructing neuron parameterizations or discrete systems.
#[derive(Clone, Debug, PartialEq)]
pub enum NeuronError {
    /// A parameter violates its domain (message names the offender).
    InvalidParameter(String),
    /// The bilinear discretization hit a singular `I - dt/2 A`.
    DegenerateBilinear,
}

impl fmt::Display for NeuronError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeuronError::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            NeuronError::DegenerateBilinear => {
                write!(f, "bilinear discretization is singular for these parameters")
            }
        }
    }
}

impl core::error::Error for NeuronError {}

/// Continuous-time adLIF parameters plus the discretization step.
///
/// Time constants and `dt` are in milliseconds. `theta` may be
/// `f64::INFINITY` for sub-threshold (never spiking) analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeuronParams {
    pub tau_u: f64,
    pub tau_w: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub dt: f64,
}

impl NeuronParams {
    pub fn new(tau_u: f64, tau_w: f64, a: f64, b: f64, theta: f64, dt: f64) -> Result<Self, NeuronError> {
        let p = Self { tau_u, tau_w, a, b, theta, dt };
        p.validate()?;
        Ok(p)
    }

    /// Sub-threshold configuration (`theta = inf`, `b = 0`).
    pub fn subthreshold(tau_u: f64, tau_w: f64, a: f64, dt: f64) -> Self {
        Self { tau_u, tau_w, a, b: 0.0, theta: f64::INFINITY, dt }
    }

    pub fn validate(&self) -> Result<(), NeuronError> {
        let err = |what: &str| Err(NeuronError::InvalidParameter(String::from(what)));
        if !(self.tau_u > 0.0) {
            return err("tau_u must be > 0");
        }
        if !(self.tau_w > 0.0) {
            return err("tau_w must be > 0");
        }
        if !(self.dt > 0.0) {
            return err("dt must be > 0");
        }
        if !(self.theta > 0.0) {
            return err("theta must be > 0 (or +inf for sub-threshold mode)");
        }
        if !(self.b >= 0.0) {
            return err("b must be >= 0");
        }
        if !self.a.is_finite() {
            return err("a must be finite");
        }
        Ok(())
    }

    /// Continuous state matrix `A` of `ds/dt = A s + B x` (per-millisecond rates).
    pub fn continuous_a(&self) -> [[f64; 2]; 2] {
        [
            [-1.0 / self.tau_u, -1.0 / self.tau_u],
            [self.a / self.tau_w, -1.0 / self.tau_w],
        ]
    }

    /// Continuous input matrix `B`.
    pub fn continuous_b(&self) -> [[f64; 2]; 2] {
        [[1.0 / self.tau_u, 0.0], [0.0, self.b / self.tau_w]]
    }
}

/// How the per-step decay coefficients are derived from the time constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DecayForm {
    /// `alpha = exp(-dt/tau)`; exact for the decoupled leak and the form used
    /// for training.
    #[default]
    Exponential,
    /// `alpha = 1 - dt/tau` (clamped into (0,1)); the raw Euler coefficient.
    Linear,
}

/// Per-step decay coefficients `alpha`, `beta` and their complements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
}

/// Decay coefficients for the given parameters.
pub fn decay_coefficients(params: &NeuronParams, form: DecayForm) -> Result<DecayCoefficients, NeuronError> {
    params.validate()?;
    let alpha = decay_factor(params.tau_u, params.dt, form);
    let beta = decay_factor(params.tau_w, params.dt, form);
    Ok(DecayCoefficients { alpha, beta, alpha_bar: 1.0 - alpha, beta_bar: 1.0 - beta })
}

pub(crate) fn decay_factor(tau: f64, dt: f64, form: DecayForm) -> f64 {
    match form {
        DecayForm::Exponential => (-dt / tau).exp(),
        DecayForm::Linear => (1.0 - dt / tau).clamp(1e-12, 1.0 - 1e-12),
    }
}

/// Discretization scheme for the sub-threshold LTI system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scheme {
    EulerForward,
    SymplecticEuler,
    /// Matrix exponential of `dt * A` with zero-order-hold input.
    Exact,
    /// Tustin transform `(I - dt/2 A)^-1 (I + dt/2 A)`.
    Bilinear,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::EulerForward => "ef",
            Scheme::SymplecticEuler => "se",
            Scheme::Exact => "exact",
            Scheme::Bilinear => "bilinear",
        }
    }
}

/// Discrete state matrix `A_bar` and input matrix `B_bar` of
/// `s[k] = A_bar s[k-1] + B_bar x[k]` with `x = (I, S)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteSystem {
    pub scheme: Scheme,
    pub a_bar: [[f64; 2]; 2],
    pub b_bar: [[f64; 2]; 2],
}

/// Builds the discrete system for `scheme` with exponential decay coefficients.
pub fn build_discrete_system(params: &NeuronParams, scheme: Scheme) -> Result<DiscreteSystem, NeuronError> {
    build_discrete_system_with_form(params, scheme, DecayForm::Exponential)
}

/// Builds the discrete system with an explicit decay-coefficient form
/// (the form only affects the Euler-Forward and Symplectic-Euler schemes).
pub fn build_discrete_system_with_form(
    params: &NeuronParams,
    scheme: Scheme,
    form: DecayForm,
) -> Result<DiscreteSystem, NeuronError> {
    params.validate()?;
    let DecayCoefficients { alpha, beta, alpha_bar, beta_bar } = decay_coefficients(params, form)?;
    let a = params.a;
    let b = params.b;
    let (a_bar, b_bar) = match scheme {
        Scheme::EulerForward => (
            [[alpha, -alpha_bar], [a * beta_bar, beta]],
            [[alpha_bar, 0.0], [0.0, b * beta_bar]],
        ),
        Scheme::SymplecticEuler => (
            // Substituting the u-update into the w-update couples the input
            // into the w row; without that entry the matrix form would not
            // reproduce the sequential update equations.
            [
                [alpha, -alpha_bar],
                [a * beta_bar * alpha, beta - a * beta_bar * alpha_bar],
            ],
            [[alpha_bar, 0.0], [a * beta_bar * alpha_bar, b * beta_bar]],
        ),
        Scheme::Exact => {
            // Augmented-block exponential gives both expm(dt A) and the
            // zero-order-hold input matrix integral_0^dt expm(A s) ds B in
            // one call, valid even when A is singular (a = -1).
            let ac = params.continuous_a();
            let bc = params.continuous_b();
            let mut aug = Mat::zeros(4, 4);
            for i in 0..2 {
                for j in 0..2 {
                    aug[(i, j)] = ac[i][j] * params.dt;
                    aug[(i, j + 2)] = bc[i][j] * params.dt;
                }
            }
            let e = expm(&aug);
            (
                [[e[(0, 0)], e[(0, 1)]], [e[(1, 0)], e[(1, 1)]]],
                [[e[(0, 2)], e[(0, 3)]], [e[(1, 2)], e[(1, 3)]]],
            )
        }
        Scheme::Bilinear => {
            let ac = params.continuous_a();
            let h = params.dt / 2.0;
            let minus = Mat::from_rows(&[
                &[1.0 - h * ac[0][0], -h * ac[0][1]],
                &[-h * ac[1][0], 1.0 - h * ac[1][1]],
            ]);
            let plus = Mat::from_rows(&[
                &[1.0 + h * ac[0][0], h * ac[0][1]],
                &[h * ac[1][0], 1.0 + h * ac[1][1]],
            ]);
            let inv = minus.inverse().map_err(|_| NeuronError::DegenerateBilinear)?;
            let ab = inv.matmul(&plus);
            let bc = params.continuous_b();
            let bm = Mat::from_rows(&[
                &[bc[0][0] * params.dt, bc[0][1] * params.dt],
                &[bc[1][0] * params.dt, bc[1][1] * params.dt],
            ]);
            let bb = inv.matmul(&bm);
            (
                [[ab[(0, 0)], ab[(0, 1)]], [ab[(1, 0)], ab[(1, 1)]]],
                [[bb[(0, 0)], bb[(0, 1)]], [bb[(1, 0)], bb[(1, 1)]]],
            )
        }
    };
    Ok(DiscreteSystem { scheme, a_bar, b_bar })
}

/// Membrane potential and adaptation current of one neuron.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeuronState {
    pub u: f64,
    pub w: f64,
}

/// Result of one discrete update step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutput {
    pub state: NeuronState,
    pub spike: bool,
    pub u_pre_reset: f64,
}

/// One adLIF step under the requested scheme.
///
/// Euler-Forward updates `w` from the previous membrane potential; the
/// Symplectic-Euler variant applies threshold and reset first and updates `w`
/// from the new, post-reset `u[k]`.
pub fn step_adlif(
    state: NeuronState,
    input_current: f64,
    coeffs: &DecayCoefficients,
    params: &NeuronParams,
    scheme: Scheme,
) -> StepOutput {
    let DecayCoefficients { alpha, beta, alpha_bar, beta_bar } = *coeffs;
    let u_hat = alpha * state.u + alpha_bar * (-state.w + input_current);
    let spike = u_hat > params.theta;
    let u = if spike { 0.0 } else { u_hat };
    let s = if spike { 1.0 } else { 0.0 };
    let w = match scheme {
        Scheme::EulerForward => beta * state.w + beta_bar * (params.a * state.u + params.b * s),
        Scheme::SymplecticEuler => beta * state.w + beta_bar * (params.a * u + params.b * s),
        _ => panic!("step_adlif supports the EulerForward and SymplecticEuler schemes"),
    };
    StepOutput { state: NeuronState { u, w }, spike, u_pre_reset: u_hat }
}

/// One LIF step: leaky integration, threshold, reset.
pub fn step_lif(u: f64, input_current: f64, alpha: f64, theta: f64) -> StepOutput {
    let u_hat = alpha * u + (1.0 - alpha) * input_current;
    let spike = u_hat > theta;
    let u_new = if spike { 0.0 } else { u_hat };
    StepOutput { state: NeuronState { u: u_new, w: 0.0 }, spike, u_pre_reset: u_hat }
}

/// Decay factor of the leaky-integrator readout, `gamma = exp(-dt/tau_out)`.
pub fn li_decay(tau_out: f64, dt: f64) -> f64 {
    (-dt / tau_out).exp()
}

/// One leaky-integrator step; no spike, no reset.
pub fn step_li(u: f64, input_current: f64, gamma: f64) -> f64 {
    gamma * u + (1.0 - gamma) * input_current
}

/// Damped harmonic oscillator neuron, parameterized directly by its natural
/// angular frequency and damping coefficient.
///
/// `omega` is in rad/s, `damping` in 1/s and the step `delta` in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BhrfParams {
    pub omega: f64,
    pub damping: f64,
    pub delta: f64,
}

impl BhrfParams {
    pub fn new(omega: f64, damping: f64, delta: f64) -> Result<Self, NeuronError> {
        if !(omega >= 0.0) || !(damping >= 0.0) || !(delta > 0.0) {
            return Err(NeuronError::InvalidParameter(String::from(
                "BHRF requires omega >= 0, damping >= 0, delta > 0",
            )));
        }
        Ok(Self { omega, damping, delta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BhrfScheme {
    EulerForward,
    SymplecticEuler,
}

/// Damping coefficient convention for the discrete BHRF update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BhrfDampingForm {
    /// `-2 b u`, consistent with the continuous oscillator `du/dt = -2bu - w^2 v + I`.
    #[default]
    DoubleCoefficient,
    /// `-b u`, the literal discrete update as sometimes written.
    Literal,
}

fn bhrf_u_coefficients(params: &BhrfParams, scheme: BhrfScheme, form: BhrfDampingForm) -> f64 {
    let d = match form {
        BhrfDampingForm::DoubleCoefficient => 2.0 * params.damping,
        BhrfDampingForm::Literal => params.damping,
    };
    match scheme {
        // Explicit Euler keeps the raw linear coefficient.
        BhrfScheme::EulerForward => 1.0 - d * params.delta,
        // The damping term is integrated exactly; this is what preserves the
        // identity between `damping` and the effective damping of the
        // discrete system.
        BhrfScheme::SymplecticEuler => (-d * params.delta).exp(),
    }
}

/// Sub-threshold state matrix of the discretized BHRF neuron
/// (state `(u, v)`, no input).
pub fn bhrf_state_matrix(
    params: &BhrfParams,
    scheme: BhrfScheme,
    form: BhrfDampingForm,
) -> [[f64; 2]; 2] {
    let g = bhrf_u_coefficients(params, scheme, form);
    let d = params.delta;
    let w2 = params.omega * params.omega;
    match scheme {
        BhrfScheme::EulerForward => [[g, -d * w2], [d, 1.0]],
        // v[k] = v[k-1] + delta * u[k], with u[k] substituted.
        BhrfScheme::SymplecticEuler => [[g, -d * w2], [d * g, 1.0 - d * d * w2]],
    }
}

/// One discrete BHRF step.
pub fn step_bhrf(
    state: (f64, f64),
    input: f64,
    params: &BhrfParams,
    scheme: BhrfScheme,
    form: BhrfDampingForm,
) -> (f64, f64) {
    let (u, v) = state;
    let g = bhrf_u_coefficients(params, scheme, form);
    let d = params.delta;
    let w2 = params.omega * params.omega;
    let u_new = g * u + d * (-w2 * v + input);
    let v_new = match scheme {
        BhrfScheme::EulerForward => v + d * u,
        BhrfScheme::SymplecticEuler => v + d * u_new,
    };
    (u_new, v_new)
}
