//! Network architecture, flat parameter storage and initialization.
//!
//! All trainable parameters of a network live in one flat vector, addressed
//! through a [`Layout`] computed from the architecture. Weight matrices are
//! stored input-major (`[fan_in][n_out]`) so that forward accumulation,
//! gradient outer products and backward feedback all stream contiguous rows.

use super::Scalar;
use crate::linalg::{qr_orthogonal, Mat};
use crate::neuron::Scheme;
use crate::rng::{self, standard_normal, streams};
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use alloc::vec::Vec;
use core::ops::Range;
use rand::Rng;

/// Spiking neuron family of a hidden layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NeuronKind {
    Lif,
    EfAdLif,
    SeAdLif,
}

impl NeuronKind {
    pub fn is_adaptive(self) -> bool {
        !matches!(self, NeuronKind::Lif)
    }

    /// Discretization scheme of the sub-threshold dynamics.
    pub fn scheme(self) -> Scheme {
        match self {
            NeuronKind::EfAdLif => Scheme::EulerForward,
            _ => Scheme::SymplecticEuler,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NeuronKind::Lif => "lif",
            NeuronKind::EfAdLif => "ef_adlif",
            NeuronKind::SeAdLif => "se_adlif",
        }
    }
}

/// One hidden layer: neuron family, width, recurrence and the trainable
/// parameter ranges.
///
/// Time constants are trained through `tau = min + theta (max - min)` with
/// `theta` clipped to [0, 1]; the couplings through `a = q a_hat`,
/// `b = q b_hat` with `a_hat`, `b_hat` clipped to their ranges.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub kind: NeuronKind,
    pub size: usize,
    pub recurrent: bool,
    pub q: f64,
    pub tau_u_range: [f64; 2],
    pub tau_w_range: [f64; 2],
    pub a_hat_range: [f64; 2],
    pub b_hat_range: [f64; 2],
}

impl LayerSpec {
    pub fn new(kind: NeuronKind, size: usize, recurrent: bool) -> Self {
        Self {
            kind,
            size,
            recurrent,
            q: 120.0,
            tau_u_range: [5.0, 25.0],
            tau_w_range: [60.0, 300.0],
            a_hat_range: [0.0, 1.0],
            b_hat_range: [0.0, 2.0],
        }
    }
}

/// Readout time constant: fixed, or trained over a range.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TauOut {
    Fixed(f64),
    Trainable([f64; 2]),
}

/// Full network architecture: hidden spiking layers plus a leaky-integrator
/// readout.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkArch {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub outputs: usize,
    pub tau_out: TauOut,
    /// Firing threshold; `f64::INFINITY` selects the sub-threshold mode in
    /// which layers emit their membrane potential instead of spikes.
    pub theta: f64,
    pub dt_ms: f64,
}

/// Parameter ranges of one layer within the flat vector.
#[derive(Clone, Debug)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub w_ff: Range<usize>,
    pub w_rec: Option<Range<usize>>,
    pub theta_u: Range<usize>,
    pub theta_w: Option<Range<usize>>,
    pub a_hat: Option<Range<usize>>,
    pub b_hat: Option<Range<usize>>,
}

#[derive(Clone, Debug)]
pub struct Layout {
    pub layers: Vec<LayerLayout>,
    pub w_out: Range<usize>,
    pub theta_out: Option<usize>,
    pub total: usize,
}

impl Layout {
    pub fn of(arch: &NetworkArch) -> Self {
        let mut offset = 0usize;
        let mut take = |len: usize| {
            let r = offset..offset + len;
            offset += len;
            r
        };
        let mut layers = Vec::with_capacity(arch.layers.len());
        let mut fan_in = arch.input_dim;
        for spec in &arch.layers {
            let n = spec.size;
            let w_ff = take(fan_in * n);
            let w_rec = spec.recurrent.then(|| take(n * n));
            let theta_u = take(n);
            let (theta_w, a_hat, b_hat) = if spec.kind.is_adaptive() {
                (Some(take(n)), Some(take(n)), Some(take(n)))
            } else {
                (None, None, None)
            };
            layers.push(LayerLayout { fan_in, w_ff, w_rec, theta_u, theta_w, a_hat, b_hat });
            fan_in = n;
        }
        let w_out = take(fan_in * arch.outputs);
        let theta_out = match arch.tau_out {
            TauOut::Trainable(_) => Some(take(1).start),
            TauOut::Fixed(_) => None,
        };
        Layout { layers, w_out, theta_out, total: offset }
    }
}

/// A network: architecture plus one flat parameter vector.
#[derive(Clone, Debug)]
pub struct Network<T: Scalar> {
    arch: NetworkArch,
    layout: Layout,
    params: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// Initializes parameters: feed-forward and readout weights uniform in
    /// `+-sqrt(1/fan_in)`, recurrent matrices orthogonal with gain 1, and all
    /// per-neuron parameters uniform over their ranges.
    pub fn init(arch: NetworkArch, seed: u64) -> Self {
        let layout = Layout::of(&arch);
        let mut params = alloc::vec![T::zero(); layout.total];
        let mut rng = rng::stream(seed, streams::WEIGHT_INIT);
        for (spec, ll) in arch.layers.iter().zip(&layout.layers) {
            let bound = (1.0 / ll.fan_in as f64).sqrt();
            for p in &mut params[ll.w_ff.clone()] {
                *p = super::sc(rng.gen_range(-bound..=bound));
            }
            if let Some(range) = &ll.w_rec {
                let n = spec.size;
                let gaussian = Mat::from_fn(n, n, |_, _| standard_normal(&mut rng));
                let q = qr_orthogonal(&gaussian);
                // Stored input-major; orthogonality makes the transpose
                // orthogonal as well, so the orientation is immaterial.
                for j in 0..n {
                    for i in 0..n {
                        params[range.start + j * n + i] = super::sc(q[(j, i)]);
                    }
                }
            }
            for p in &mut params[ll.theta_u.clone()] {
                *p = super::sc(rng.gen_range(0.0..=1.0));
            }
            if let Some(r) = &ll.theta_w {
                for p in &mut params[r.clone()] {
                    *p = super::sc(rng.gen_range(0.0..=1.0));
                }
            }
            if let Some(r) = &ll.a_hat {
                for p in &mut params[r.clone()] {
                    *p = super::sc(rng.gen_range(spec.a_hat_range[0]..=spec.a_hat_range[1]));
                }
            }
            if let Some(r) = &ll.b_hat {
                for p in &mut params[r.clone()] {
                    *p = super::sc(rng.gen_range(spec.b_hat_range[0]..=spec.b_hat_range[1]));
                }
            }
        }
        let n_last = arch.layers.last().map_or(arch.input_dim, |l| l.size);
        let bound = (1.0 / n_last as f64).sqrt();
        for p in &mut params[layout.w_out.clone()] {
            *p = super::sc(rng.gen_range(-bound..=bound));
        }
        if let Some(idx) = layout.theta_out {
            params[idx] = super::sc(rng.gen_range(0.0..=1.0));
        }
        Self { arch, layout, params }
    }

    pub fn from_params(arch: NetworkArch, params: Vec<T>) -> Self {
        let layout = Layout::of(&arch);
        assert_eq!(params.len(), layout.total, "parameter vector does not match architecture");
        Self { arch, layout, params }
    }

    pub fn arch(&self) -> &NetworkArch {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[T]) {
        assert_eq!(params.len(), self.params.len());
        self.params.copy_from_slice(params);
    }

    /// Converts the parameter precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            arch: self.arch.clone(),
            layout: Layout::of(&self.arch),
            params: self.params.iter().map(|&p| super::sc(p.to_f64().unwrap())).collect(),
        }
    }

    /// Clamps every reparameterized neuron parameter into its declared
    /// interval; called after each optimizer step.
    pub fn clip_params(&mut self) {
        let clamp = |slice: &mut [T], lo: f64, hi: f64| {
            let (lo, hi) = (super::sc::<T>(lo), super::sc::<T>(hi));
            for p in slice {
                if *p < lo {
                    *p = lo;
                } else if *p > hi {
                    *p = hi;
                }
            }
        };
        for (spec, ll) in self.arch.layers.iter().zip(&self.layout.layers).collect::<Vec<_>>() {
            clamp(&mut self.params[ll.theta_u.clone()], 0.0, 1.0);
            if let Some(r) = &ll.theta_w {
                clamp(&mut self.params[r.clone()], 0.0, 1.0);
            }
            if let Some(r) = &ll.a_hat {
                clamp(&mut self.params[r.clone()], spec.a_hat_range[0], spec.a_hat_range[1]);
            }
            if let Some(r) = &ll.b_hat {
                clamp(&mut self.params[r.clone()], spec.b_hat_range[0], spec.b_hat_range[1]);
            }
        }
        if let Some(idx) = self.layout.theta_out {
            clamp(&mut self.params[idx..idx + 1], 0.0, 1.0);
        }
    }

    /// Effective (tau_u, tau_w, a, b) of one neuron after reparameterization.
    pub fn neuron_parameters(&self, layer: usize, neuron: usize) -> (f64, f64, f64, f64) {
        let spec = &self.arch.layers[layer];
        let ll = &self.layout.layers[layer];
        let theta_u = self.params[ll.theta_u.start + neuron].to_f64().unwrap();
        let tau_u = spec.tau_u_range[0] + theta_u * (spec.tau_u_range[1] - spec.tau_u_range[0]);
        if !spec.kind.is_adaptive() {
            return (tau_u, f64::INFINITY, 0.0, 0.0);
        }
        let theta_w = self.params[ll.theta_w.as_ref().unwrap().start + neuron].to_f64().unwrap();
        let tau_w = spec.tau_w_range[0] + theta_w * (spec.tau_w_range[1] - spec.tau_w_range[0]);
        let a = spec.q * self.params[ll.a_hat.as_ref().unwrap().start + neuron].to_f64().unwrap();
        let b = spec.q * self.params[ll.b_hat.as_ref().unwrap().start + neuron].to_f64().unwrap();
        (tau_u, tau_w, a, b)
    }

    /// Readout decay factor `gamma` (and its tau).
    pub fn tau_out(&self) -> f64 {
        match self.arch.tau_out {
            TauOut::Fixed(tau) => tau,
            TauOut::Trainable([lo, hi]) => {
                let theta = self.params[self.layout.theta_out.unwrap()].to_f64().unwrap();
                lo + theta * (hi - lo)
            }
        }
    }
}
