//! Input generators and response metrics for single-neuron experiments:
//! deterministic spike trains, rate-modulated sinusoid encodings, wavelet
//! currents and the RMS voltage response probe.

use crate::neuron::{decay_coefficients, step_adlif, DecayForm, NeuronParams, NeuronState, Scheme};
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

/// A binary spike train on a fixed time grid (`dt` in ms).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpikeTrain {
    pub dt: f64,
    pub spikes: Vec<u8>,
}

impl SpikeTrain {
    pub fn count(&self) -> usize {
        self.spikes.iter().filter(|&&s| s == 1).count()
    }

    pub fn spike_times(&self) -> Vec<usize> {
        self.spikes
            .iter()
            .enumerate()
            .filter_map(|(t, &s)| (s == 1).then_some(t))
            .collect()
    }
}

/// A real-valued input current on a fixed time grid (`dt` in ms).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurrentTrace {
    pub dt: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SignalError {
    /// Requested rate cannot be represented on the time grid.
    RateAboveGrid { rate_hz: f64, dt: f64 },
    Invalid(String),
}

impl fmt::Display for SignalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalError::RateAboveGrid { rate_hz, dt } => {
                write!(f, "rate {rate_hz} Hz exceeds the {dt} ms grid resolution")
            }
            SignalError::Invalid(what) => write!(f, "invalid signal request: {what}"),
        }
    }
}

impl core::error::Error for SignalError {}

/// Encodes a sinusoid of frequency `freq_hz` as a spike train via
/// spike-frequency modulation.
///
/// The instantaneous rate is `s[t] = 0.2 (0.5 + 0.5 sin(2 pi t F dt))`
/// (so at most one spike per 5 steps) and spikes are emitted by an
/// integrate-and-fire accumulator `v[t] = v[t-1] + s[t] - S[t]` that fires
/// whenever the accumulated rate crosses 1.
pub fn sfm_encode(freq_hz: f64, t_steps: usize, dt: f64) -> SpikeTrain {
    assert!(freq_hz >= 0.0 && dt > 0.0 && t_steps >= 1);
    let mut spikes = Vec::with_capacity(t_steps);
    let mut v = 0.0;
    for t in 0..t_steps {
        let rate = 0.2 * (0.5 + 0.5 * (2.0 * PI * t as f64 * freq_hz * dt * 1e-3).sin());
        v += rate;
        let fire = v >= 1.0;
        if fire {
            v -= 1.0;
        }
        spikes.push(fire as u8);
    }
    SpikeTrain { dt, spikes }
}

/// Regular spike train: one spike every `round(1000 / (rate * dt))` steps,
/// the first spike after one full interval.
pub fn tonic_train(rate_hz: f64, t_steps: usize, dt: f64) -> Result<SpikeTrain, SignalError> {
    if rate_hz < 0.0 || !rate_hz.is_finite() {
        return Err(SignalError::Invalid(String::from("rate must be finite and nonnegative")));
    }
    let mut spikes = alloc::vec![0u8; t_steps];
    if rate_hz > 0.0 {
        let interval_steps = (1000.0 / (rate_hz * dt)).round() as usize;
        if interval_steps == 0 {
            return Err(SignalError::RateAboveGrid { rate_hz, dt });
        }
        let mut t = interval_steps;
        while t < t_steps {
            spikes[t] = 1;
            t += interval_steps;
        }
    }
    Ok(SpikeTrain { dt, spikes })
}

/// Three spikes at cumulatively rounded multiples of the inter-spike
/// interval (round half up), e.g. 60 Hz on a 1 ms grid gives {17, 33, 50}.
pub fn spike_triplet(rate_hz: f64, t_steps: usize, dt: f64) -> Result<SpikeTrain, SignalError> {
    if !(rate_hz > 0.0) {
        return Err(SignalError::Invalid(String::from("triplet rate must be positive")));
    }
    let mut spikes = alloc::vec![0u8; t_steps];
    for k in 1..=3usize {
        let t = (k as f64 * 1000.0 / (rate_hz * dt) + 0.5).floor() as usize;
        if t >= t_steps {
            break;
        }
        spikes[t] = 1;
    }
    Ok(SpikeTrain { dt, spikes })
}

/// First derivative of a Gaussian, normalized to peak amplitude `amplitude`,
/// centred at `center_time_ms`.
///
/// The width is chosen so the spectral peak sits at `center_freq_hz`
/// (`sigma = 1 / (2 pi f_c)`); the trace is zero-mean by antisymmetry.
pub fn wavelet_current(
    center_freq_hz: f64,
    center_time_ms: f64,
    amplitude: f64,
    t_steps: usize,
    dt: f64,
) -> CurrentTrace {
    assert!(center_freq_hz > 0.0 && dt > 0.0);
    let sigma_ms = 1000.0 / (2.0 * PI * center_freq_hz);
    // max |g'| over t occurs at one sigma from the centre.
    let peak = (-0.5f64).exp() / sigma_ms;
    let values = (0..t_steps)
        .map(|t| {
            let x = t as f64 * dt - center_time_ms;
            let raw = (-x / (sigma_ms * sigma_ms)) * (-x * x / (2.0 * sigma_ms * sigma_ms)).exp();
            amplitude * raw / peak
        })
        .collect();
    CurrentTrace { dt, values }
}

/// Constant current of the given value.
pub fn constant_current(value: f64, t_steps: usize, dt: f64) -> CurrentTrace {
    CurrentTrace { dt, values: alloc::vec![value; t_steps] }
}

/// Drive signal for the response probe.
#[derive(Clone, Copy, Debug)]
pub enum Drive<'a> {
    Spikes(&'a SpikeTrain),
    Current(&'a CurrentTrace),
}

impl Drive<'_> {
    fn value(&self, t: usize) -> f64 {
        match self {
            Drive::Spikes(train) => train.spikes.get(t).copied().unwrap_or(0) as f64,
            Drive::Current(trace) => trace.values.get(t).copied().unwrap_or(0.0),
        }
    }
}

/// Root-mean-square membrane potential of a sub-threshold neuron driven with
/// `weight * input` over `duration_steps`.
pub fn rms_response(
    params: &NeuronParams,
    scheme: Scheme,
    input: Drive<'_>,
    weight: f64,
    duration_steps: usize,
) -> f64 {
    assert!(params.theta.is_infinite(), "the response probe is a sub-threshold measurement");
    let coeffs = decay_coefficients(params, DecayForm::Exponential).expect("valid params");
    let mut state = NeuronState::default();
    let mut acc = 0.0;
    for t in 0..duration_steps {
        state = step_adlif(state, weight * input.value(t), &coeffs, params, scheme).state;
        acc += state.u * state.u;
    }
    (acc / duration_steps as f64).sqrt()
}
