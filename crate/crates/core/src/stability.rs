//! Eigenvalue characterization of the continuous and discretized neuron
//! dynamics: decay rates, intrinsic frequencies, damping regimes, closed-form
//! stability bounds and the frequency-to-parameter inversion for the
//! Symplectic-Euler scheme.

use crate::neuron::{
    bhrf_state_matrix, build_discrete_system_with_form, decay_coefficients, BhrfDampingForm,
    BhrfParams, BhrfScheme, DecayForm, DiscreteSystem, NeuronParams, Scheme,
};
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

/// A complex number as a plain (re, im) pair; all we need for eigenvalues.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn modulus(self) -> f64 {
        (self.re * self.re + self.im * self.im).sqrt()
    }
}

/// Damping regime of a two-state linear system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    Underdamped,
    CriticallyDamped,
    Overdamped,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Underdamped => "underdamped",
            Regime::CriticallyDamped => "critical",
            Regime::Overdamped => "overdamped",
        }
    }
}

/// Eigen characterization of one discrete (per-step) system.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenAnalysis {
    pub lambda1: Complex,
    pub lambda2: Complex,
    /// Spectral radius; the per-step decay rate.
    pub r: f64,
    /// Principal eigenvalue angle in [0, pi]; 0 for non-oscillatory systems.
    pub phi: f64,
    /// Intrinsic frequency in Hz, `phi / (2 pi dt)`.
    pub f_hz: f64,
    pub regime: Regime,
    /// Effective time constant `-dt / ln r` in ms (only meaningful for r < 1).
    pub tau_eff: f64,
    pub stable: bool,
    /// Step duration in ms this analysis refers to.
    pub dt: f64,
}

/// Errors from the stability operations.
#[derive(Clone, Debug, PartialEq)]
pub enum StabilityError {
    /// Target frequency outside `(0, f_N]`.
    FrequencyOutOfRange { f_target: f64, f_nyquist: f64 },
    /// The requested scheme has no full-bandwidth frequency bijection.
    UnsupportedScheme(Scheme),
    /// Invalid parameter or range (message names the offender).
    Invalid(String),
}

impl fmt::Display for StabilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityError::FrequencyOutOfRange { f_target, f_nyquist } => {
                write!(f, "target frequency {f_target} Hz outside (0, {f_nyquist}] Hz")
            }
            StabilityError::UnsupportedScheme(s) => {
                write!(f, "no full-range frequency bijection exists for scheme {s:?}")
            }
            StabilityError::Invalid(what) => write!(f, "invalid input: {what}"),
        }
    }
}

impl core::error::Error for StabilityError {}

/// Eigen analysis of an arbitrary 2x2 state matrix stepped every `dt` ms.
///
/// Uses the numerically stable quadratic solve on trace/determinant; complex
/// moduli come from the determinant to avoid cancellation at the stability
/// boundary.
pub fn analyze_matrix(m: &[[f64; 2]; 2], dt: f64) -> EigenAnalysis {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    // Floating-point discriminants are never exactly zero; classify ties
    // toward critical damping on a relative scale.
    let scale = (tr * tr).max((4.0 * det).abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let (lambda1, lambda2, r, phi, regime) = if disc < -tol {
        let re = tr / 2.0;
        let im = (-disc).sqrt() / 2.0;
        let r = det.sqrt();
        let phi = im.atan2(re);
        (Complex::new(re, im), Complex::new(re, -im), r, phi, Regime::Underdamped)
    } else if disc <= tol {
        let l = tr / 2.0;
        (Complex::new(l, 0.0), Complex::new(l, 0.0), l.abs(), 0.0, Regime::CriticallyDamped)
    } else {
        let sq = disc.sqrt();
        // Sign-matched root first, the other via the product of roots.
        let q = if tr >= 0.0 { (tr + sq) / 2.0 } else { (tr - sq) / 2.0 };
        let (l1, l2) = if q == 0.0 { (0.0, 0.0) } else { (q, det / q) };
        let (l1, l2) = if l1.abs() >= l2.abs() { (l1, l2) } else { (l2, l1) };
        (Complex::new(l1, 0.0), Complex::new(l2, 0.0), l1.abs(), 0.0, Regime::Overdamped)
    };

    EigenAnalysis {
        lambda1,
        lambda2,
        r,
        phi,
        f_hz: phi / (2.0 * PI * dt * 1e-3),
        regime,
        tau_eff: -dt / r.ln(),
        stable: r < 1.0,
        dt,
    }
}

/// Eigen analysis of a discrete neuron system.
pub fn analyze(sys: &DiscreteSystem, dt: f64) -> EigenAnalysis {
    analyze_matrix(&sys.a_bar, dt)
}

/// Eigen analysis of the continuous adLIF model.
///
/// Eigenvalues are per-millisecond rates of the continuous state matrix; the
/// decay rate is reported per `params.dt` step (`exp(Re(lambda) dt)`) so it is
/// directly comparable with the discrete schemes.
pub fn continuous_eigenvalues(params: &NeuronParams) -> EigenAnalysis {
    let (tu, tw, a) = (params.tau_u, params.tau_w, params.a);
    let dt = params.dt;
    let disc = (tu - tw) * (tu - tw) - 4.0 * a * tu * tw;
    let denom = 2.0 * tu * tw;
    let scale = ((tu - tw) * (tu - tw)).max((4.0 * a * tu * tw).abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let (lambda1, lambda2, regime) = if disc < -tol {
        let re = (-tu - tw) / denom;
        let im = (-disc).sqrt() / denom;
        (Complex::new(re, im), Complex::new(re, -im), Regime::Underdamped)
    } else if disc <= tol {
        let l = (-tu - tw) / denom;
        (Complex::new(l, 0.0), Complex::new(l, 0.0), Regime::CriticallyDamped)
    } else {
        let sq = disc.sqrt();
        let l1 = (-tu - tw + sq) / denom;
        let l2 = (-tu - tw - sq) / denom;
        (Complex::new(l1, 0.0), Complex::new(l2, 0.0), Regime::Overdamped)
    };

    let max_re = lambda1.re.max(lambda2.re);
    let r = (max_re * dt).exp();
    let (phi, f_hz) = if regime == Regime::Underdamped {
        // Angle advanced per step by the rotating eigen-pair.
        let phi = lambda1.im * dt;
        (phi, phi / (2.0 * PI * dt * 1e-3))
    } else {
        (0.0, 0.0)
    };
    EigenAnalysis {
        lambda1,
        lambda2,
        r,
        phi,
        f_hz,
        regime,
        tau_eff: -dt / r.ln(),
        stable: r < 1.0,
        dt,
    }
}

/// Closed-form eigen analysis from the per-scheme lemma formulas, bypassing
/// the state matrix entirely. Serves as the second algebraic route against
/// the numeric `analyze`.
pub fn closed_form_analysis(
    params: &NeuronParams,
    scheme: Scheme,
    form: DecayForm,
) -> Result<EigenAnalysis, StabilityError> {
    let c = decay_coefficients(params, form)
        .map_err(|e| StabilityError::Invalid(String::from("bad params: ") + &alloc::format!("{e}")))?;
    let (alpha, beta, ab, bb) = (c.alpha, c.beta, c.alpha_bar, c.beta_bar);
    let a = params.a;
    let dt = params.dt;
    // Characteristic polynomial lambda^2 - tr lambda + det per scheme.
    let (tr, det, disc) = match scheme {
        Scheme::EulerForward => {
            let tr = alpha + beta;
            let det = alpha * beta + a * ab * bb;
            let disc = (alpha - beta) * (alpha - beta) - 4.0 * a * ab * bb;
            (tr, det, disc)
        }
        Scheme::SymplecticEuler => {
            let tr = alpha + beta - a * ab * bb;
            let det = alpha * beta;
            let disc = tr * tr - 4.0 * det;
            (tr, det, disc)
        }
        other => return Err(StabilityError::UnsupportedScheme(other)),
    };
    let scale = (tr * tr).max((4.0 * det).abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let analysis = if disc < -tol {
        let re = tr / 2.0;
        let im = (-disc).sqrt() / 2.0;
        // Complex modulus straight from the lemmas.
        let r = match scheme {
            Scheme::EulerForward => (alpha * beta + a * ab * bb).sqrt(),
            _ => (alpha * beta).sqrt(),
        };
        let phi = im.atan2(re);
        EigenAnalysis {
            lambda1: Complex::new(re, im),
            lambda2: Complex::new(re, -im),
            r,
            phi,
            f_hz: phi / (2.0 * PI * dt * 1e-3),
            regime: Regime::Underdamped,
            tau_eff: -dt / r.ln(),
            stable: r < 1.0,
            dt,
        }
    } else if disc <= tol {
        let l = tr / 2.0;
        EigenAnalysis {
            lambda1: Complex::new(l, 0.0),
            lambda2: Complex::new(l, 0.0),
            r: l.abs(),
            phi: 0.0,
            f_hz: 0.0,
            regime: Regime::CriticallyDamped,
            tau_eff: -dt / l.abs().ln(),
            stable: l.abs() < 1.0,
            dt,
        }
    } else {
        let sq = disc.sqrt();
        let q = if tr >= 0.0 { (tr + sq) / 2.0 } else { (tr - sq) / 2.0 };
        let (l1, l2) = if q == 0.0 { (0.0, 0.0) } else { (q, det / q) };
        let (l1, l2) = if l1.abs() >= l2.abs() { (l1, l2) } else { (l2, l1) };
        let r = l1.abs();
        EigenAnalysis {
            lambda1: Complex::new(l1, 0.0),
            lambda2: Complex::new(l2, 0.0),
            r,
            phi: 0.0,
            f_hz: 0.0,
            regime: Regime::Overdamped,
            tau_eff: -dt / r.ln(),
            stable: r < 1.0,
            dt,
        }
    };
    Ok(analysis)
}

/// Closed-form stability bounds on the coupling parameter `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityBounds {
    pub scheme: Scheme,
    /// Lower stability bound (-1 for both schemes).
    pub a_min: f64,
    /// Onset of the oscillatory (complex-eigenvalue) regime.
    pub a_osc_low: f64,
    /// End of the oscillatory regime.
    pub a_osc_high: f64,
    /// Absolute upper stability bound.
    pub a_max: f64,
}

/// Stability bounds for the exponential decay-coefficient form.
pub fn bounds(params: &NeuronParams, scheme: Scheme) -> Result<StabilityBounds, StabilityError> {
    bounds_with_form(params, scheme, DecayForm::Exponential)
}

pub fn bounds_with_form(
    params: &NeuronParams,
    scheme: Scheme,
    form: DecayForm,
) -> Result<StabilityBounds, StabilityError> {
    let c = decay_coefficients(params, form)
        .map_err(|e| StabilityError::Invalid(alloc::format!("{e}")))?;
    let (alpha, beta, ab, bb) = (c.alpha, c.beta, c.alpha_bar, c.beta_bar);
    match scheme {
        Scheme::EulerForward => {
            let a0 = (alpha - beta) * (alpha - beta) / (4.0 * ab * bb);
            let a_max = (1.0 - alpha * beta) / (ab * bb);
            Ok(StabilityBounds {
                scheme,
                a_min: -1.0,
                a_osc_low: a0,
                a_osc_high: a_max,
                a_max,
            })
        }
        Scheme::SymplecticEuler => {
            let (sa, sb) = (alpha.sqrt(), beta.sqrt());
            let a1 = (sb - sa) * (sb - sa) / (ab * bb);
            let a2 = (sb + sa) * (sb + sa) / (ab * bb);
            let a_max = (1.0 + alpha) * (1.0 + beta) / (ab * bb);
            Ok(StabilityBounds {
                scheme,
                a_min: -1.0,
                a_osc_low: a1,
                a_osc_high: a2,
                a_max,
            })
        }
        other => Err(StabilityError::UnsupportedScheme(other)),
    }
}

/// The unique `a` giving an SE-discretized neuron the intrinsic frequency
/// `f_target` (Hz), inverting `cos(2 pi dt f) = Re(lambda_1) / sqrt(alpha beta)`.
///
/// Only the Symplectic-Euler scheme admits this full-bandwidth bijection.
pub fn a_for_frequency(
    tau_u: f64,
    tau_w: f64,
    dt: f64,
    f_target: f64,
    scheme: Scheme,
) -> Result<f64, StabilityError> {
    if scheme != Scheme::SymplecticEuler {
        return Err(StabilityError::UnsupportedScheme(scheme));
    }
    let f_nyquist = 1.0 / (2.0 * dt * 1e-3);
    if !(f_target > 0.0) || f_target > f_nyquist {
        return Err(StabilityError::FrequencyOutOfRange { f_target, f_nyquist });
    }
    let params = NeuronParams::subthreshold(tau_u, tau_w, 0.0, dt);
    let c = decay_coefficients(&params, DecayForm::Exponential)
        .map_err(|e| StabilityError::Invalid(alloc::format!("{e}")))?;
    let phi = 2.0 * PI * dt * 1e-3 * f_target;
    Ok((c.alpha + c.beta - 2.0 * (c.alpha * c.beta).sqrt() * phi.cos()) / (c.alpha_bar * c.beta_bar))
}

/// Maximum intrinsic frequency (Hz) reachable by a stable Euler-Forward
/// neuron, attained at `a = a_max`: `phi_max = arcsin(sqrt(4 - (alpha+beta)^2)/2)`.
pub fn ef_max_frequency(tau_u: f64, tau_w: f64, dt: f64) -> f64 {
    let params = NeuronParams::subthreshold(tau_u, tau_w, 0.0, dt);
    let c = decay_coefficients(&params, DecayForm::Exponential).expect("positive time constants");
    let s = c.alpha + c.beta;
    let phi_max = ((4.0 - s * s).sqrt() / 2.0).asin();
    phi_max / (2.0 * PI * dt * 1e-3)
}

/// Decay rate normalized to a 1 ms step, `r^(1ms/dt)`, for cross-step-size
/// comparisons.
pub fn normalized_decay_per_ms(r: f64, dt: f64) -> f64 {
    r.powf(1.0 / dt)
}

/// Model column of a sweep row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SweepModel {
    EulerForward,
    SymplecticEuler,
    Continuous,
}

impl SweepModel {
    pub fn label(self) -> &'static str {
        match self {
            SweepModel::EulerForward => "ef",
            SweepModel::SymplecticEuler => "se",
            SweepModel::Continuous => "continuous",
        }
    }
}

/// One grid point of a stability sweep.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub tau_u: f64,
    pub tau_w: f64,
    pub a: f64,
    pub model: SweepModel,
    pub analysis: EigenAnalysis,
}

/// Inclusive uniform grid with `n` points over `[lo, hi]`.
fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return alloc::vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Deterministic uniform grid sweep over `(tau_u, tau_w, a)`.
pub fn sweep_grid(
    tau_u_range: [f64; 2],
    tau_w_range: [f64; 2],
    a_range: [f64; 2],
    n_per_axis: [usize; 3],
    model: SweepModel,
    dt: f64,
) -> Result<Vec<SweepRow>, StabilityError> {
    if !(tau_u_range[0] > 0.0 && tau_u_range[1] >= tau_u_range[0]) {
        return Err(StabilityError::Invalid(String::from("tau_u range must be positive and ordered")));
    }
    if !(tau_w_range[0] > 0.0 && tau_w_range[1] >= tau_w_range[0]) {
        return Err(StabilityError::Invalid(String::from("tau_w range must be positive and ordered")));
    }
    if !(a_range[1] >= a_range[0]) {
        return Err(StabilityError::Invalid(String::from("a range must be ordered")));
    }
    if n_per_axis.iter().any(|&n| n == 0) {
        return Err(StabilityError::Invalid(String::from("grid sizes must be nonzero")));
    }
    let mut rows = Vec::with_capacity(n_per_axis.iter().product());
    for &tau_u in &grid(tau_u_range[0], tau_u_range[1], n_per_axis[0]) {
        for &tau_w in &grid(tau_w_range[0], tau_w_range[1], n_per_axis[1]) {
            for &a in &grid(a_range[0], a_range[1], n_per_axis[2]) {
                let params = NeuronParams::subthreshold(tau_u, tau_w, a, dt);
                let analysis = match model {
                    SweepModel::Continuous => continuous_eigenvalues(&params),
                    SweepModel::EulerForward => {
                        let sys = build_discrete_system_with_form(
                            &params,
                            Scheme::EulerForward,
                            DecayForm::Exponential,
                        )
                        .expect("validated params");
                        analyze(&sys, dt)
                    }
                    SweepModel::SymplecticEuler => {
                        let sys = build_discrete_system_with_form(
                            &params,
                            Scheme::SymplecticEuler,
                            DecayForm::Exponential,
                        )
                        .expect("validated params");
                        analyze(&sys, dt)
                    }
                };
                rows.push(SweepRow { tau_u, tau_w, a, model, analysis });
            }
        }
    }
    Ok(rows)
}

/// One grid point of the BHRF effective-parameter map.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BhrfMapRow {
    pub omega: f64,
    pub damping: f64,
    /// Effective oscillation frequency in rad/s; `None` when not underdamped.
    pub omega_eff: Option<f64>,
    /// Effective damping `-ln(r)/delta` in 1/s.
    pub b_eff: f64,
    pub r: f64,
    pub stable: bool,
    pub underdamped: bool,
}

/// Eigen-analyzes the discretized BHRF neuron over an `(omega, damping)` grid.
pub fn bhrf_effective_map(
    omega_range: [f64; 2],
    n_omega: usize,
    damping_range: [f64; 2],
    n_damping: usize,
    delta: f64,
    scheme: BhrfScheme,
    form: BhrfDampingForm,
) -> Result<Vec<BhrfMapRow>, StabilityError> {
    if !(delta > 0.0) {
        return Err(StabilityError::Invalid(String::from("delta must be > 0")));
    }
    let mut rows = Vec::with_capacity(n_omega * n_damping);
    for &omega in &grid(omega_range[0], omega_range[1], n_omega) {
        for &damping in &grid(damping_range[0], damping_range[1], n_damping) {
            let params = BhrfParams::new(omega, damping, delta)
                .map_err(|e| StabilityError::Invalid(alloc::format!("{e}")))?;
            let m = bhrf_state_matrix(&params, scheme, form);
            let analysis = analyze_matrix(&m, delta * 1e3);
            let underdamped = analysis.regime == Regime::Underdamped;
            rows.push(BhrfMapRow {
                omega,
                damping,
                omega_eff: underdamped.then(|| analysis.phi / delta),
                b_eff: -analysis.r.ln() / delta,
                r: analysis.r,
                stable: analysis.stable,
                underdamped,
            });
        }
    }
    Ok(rows)
}
