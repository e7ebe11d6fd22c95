//! Synthetic task generators with analytic ground truth: the N-mass spring
//! chain (exact matrix-exponential propagation, closed-form eigenfrequencies
//! for uniform coefficients) and the burst-sequence-detection classification
//! dataset.

use crate::linalg::{expm, Mat};
use crate::rng::{self, streams};
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum SystemsError {
    Invalid(String),
    /// No spring-coefficient interval realizes the requested frequency band.
    InfeasibleBandwidth { f_min_hz: f64, f_max_hz: f64, n: usize },
}

impl fmt::Display for SystemsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemsError::Invalid(what) => write!(f, "invalid system: {what}"),
            SystemsError::InfeasibleBandwidth { f_min_hz, f_max_hz, n } => write!(
                f,
                "no spring range covers [{f_min_hz}, {f_max_hz}] Hz with {n} masses: \
                 the minimum- and maximum-frequency constraints cross"
            ),
        }
    }
}

impl core::error::Error for SystemsError {}

/// A chain of `n` unit-ish masses coupled by `n+1` springs, with the exact
/// one-step propagator of the block system precomputed.
#[derive(Clone, Debug)]
pub struct SpringMassSystem {
    masses: Vec<f64>,
    springs: Vec<f64>,
    s_mat: Mat,
    dt_sim_ms: f64,
    propagator: Mat,
}

impl SpringMassSystem {
    /// Builds the system; `masses.len() + 1 == springs.len()` is required.
    pub fn new(masses: Vec<f64>, springs: Vec<f64>, dt_sim_ms: f64) -> Result<Self, SystemsError> {
        let n = masses.len();
        if n == 0 {
            return Err(SystemsError::Invalid(String::from("need at least one mass")));
        }
        if springs.len() != n + 1 {
            return Err(SystemsError::Invalid(String::from("need n+1 spring coefficients")));
        }
        if masses.iter().any(|&m| !(m > 0.0)) || springs.iter().any(|&s| !(s > 0.0)) {
            return Err(SystemsError::Invalid(String::from("masses and springs must be positive")));
        }
        if !(dt_sim_ms > 0.0) {
            return Err(SystemsError::Invalid(String::from("dt must be positive")));
        }
        let s_mat = stiffness_matrix(&springs);
        let propagator = propagator(&masses, &s_mat, dt_sim_ms);
        Ok(Self { masses, springs, s_mat, dt_sim_ms, propagator })
    }

    /// Uniform chain: all masses 1 kg, all springs `s` N/m.
    pub fn uniform(n: usize, s: f64, dt_sim_ms: f64) -> Result<Self, SystemsError> {
        Self::new(alloc::vec![1.0; n], alloc::vec![s; n + 1], dt_sim_ms)
    }

    pub fn n_masses(&self) -> usize {
        self.masses.len()
    }

    pub fn springs(&self) -> &[f64] {
        &self.springs
    }

    pub fn stiffness(&self) -> &Mat {
        &self.s_mat
    }

    pub fn dt_sim_ms(&self) -> f64 {
        self.dt_sim_ms
    }

    /// Exact trajectory from `(x0, v0)`: `t_steps` rows of displacements,
    /// starting with `x0` itself.
    pub fn simulate(&self, x0: &[f64], v0: &[f64], t_steps: usize) -> Vec<Vec<f64>> {
        let n = self.n_masses();
        assert_eq!(x0.len(), n);
        assert_eq!(v0.len(), n);
        let mut state: Vec<f64> = x0.iter().chain(v0.iter()).copied().collect();
        let mut rows = Vec::with_capacity(t_steps);
        for _ in 0..t_steps {
            rows.push(state[..n].to_vec());
            state = self.propagator.matvec(&state);
        }
        rows
    }

    /// Advances a full `(x, v)` state by one simulation step.
    pub fn step_state(&self, state: &[f64]) -> Vec<f64> {
        self.propagator.matvec(state)
    }

    /// Total mechanical energy `v^T M v / 2 + x^T S x / 2`.
    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let kinetic: f64 = v.iter().zip(&self.masses).map(|(&vi, &m)| m * vi * vi).sum::<f64>() / 2.0;
        let sx = self.s_mat.matvec(x);
        let potential: f64 = x.iter().zip(&sx).map(|(&xi, &si)| xi * si).sum::<f64>() / 2.0;
        kinetic + potential
    }
}

/// Tridiagonal stiffness matrix: `S_ii = s_i + s_{i+1}`, `S_{i,i+1} = -s_{i+1}`,
/// `S_{i,i-1} = -s_i`.
fn stiffness_matrix(springs: &[f64]) -> Mat {
    let n = springs.len() - 1;
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            springs[i] + springs[i + 1]
        } else if j + 1 == i {
            -springs[i]
        } else if j == i + 1 {
            -springs[i + 1]
        } else {
            0.0
        }
    })
}

/// One-step propagator `expm(dt * [[0, I], [-M^-1 S, 0]])`, with dt in
/// seconds internally since the spring coefficients are N/m.
fn propagator(masses: &[f64], s_mat: &Mat, dt_sim_ms: f64) -> Mat {
    let n = masses.len();
    let dt_s = dt_sim_ms * 1e-3;
    let mut block = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        block[(i, n + i)] = dt_s;
        for j in 0..n {
            block[(n + i, j)] = -s_mat[(i, j)] / masses[i] * dt_s;
        }
    }
    expm(&block)
}

/// Random chain: springs uniform (inclusive) in `[lo, hi]`, masses fixed to
/// 1 kg, deterministic in `seed`.
pub fn spring_mass_generate(
    n: usize,
    spring_range: [f64; 2],
    dt_sim_ms: f64,
    seed: u64,
) -> Result<SpringMassSystem, SystemsError> {
    let [lo, hi] = spring_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(SystemsError::Invalid(String::from("spring range must satisfy 0 < lo <= hi")));
    }
    let mut rng = rng::stream(seed, streams::SPRING_COEFFICIENTS);
    let springs: Vec<f64> = (0..n + 1).map(|_| rng.gen_range(lo..=hi)).collect();
    SpringMassSystem::new(alloc::vec![1.0; n], springs, dt_sim_ms)
}

/// Closed-form eigenfrequencies (rad/s) of the uniform chain:
/// `omega_j^2 = 4 s sin^2(j pi / (2(n+1)))` for `j = 1..n`.
pub fn eigenfrequencies_uniform(n: usize, s: f64) -> Vec<f64> {
    assert!(s > 0.0);
    (1..=n)
        .map(|j| 2.0 * s.sqrt() * (j as f64 * PI / (2.0 * (n as f64 + 1.0))).sin())
        .collect()
}

/// Spring-coefficient interval whose uniform-chain band approximately covers
/// `[f_min_hz, f_max_hz]`, inverting `omega_max ~ 2 sqrt(s)` and
/// `omega_min ~ (pi/(n+1)) sqrt(s)`.
pub fn spring_range_for_bandwidth(
    f_min_hz: f64,
    f_max_hz: f64,
    n: usize,
) -> Result<[f64; 2], SystemsError> {
    if !(f_min_hz > 0.0 && f_max_hz > f_min_hz) {
        return Err(SystemsError::Invalid(String::from("need 0 < f_min < f_max")));
    }
    let s_hi = (PI * f_max_hz).powi(2);
    let s_lo = 4.0 * ((n as f64 + 1.0) * f_min_hz).powi(2);
    if s_lo > s_hi {
        return Err(SystemsError::InfeasibleBandwidth { f_min_hz, f_max_hz, n });
    }
    Ok([s_lo, s_hi])
}

/// A set of exact trajectories from random initial displacements
/// (standard normal per mass, zero initial velocity).
#[derive(Clone, Debug)]
pub struct TrajectoryDataset {
    /// Row-major `t_steps x n` displacement arrays.
    pub samples: Vec<Vec<f64>>,
    pub n: usize,
    pub t_steps: usize,
    pub dt_sim_ms: f64,
    pub springs: Vec<f64>,
    pub seed: u64,
}

/// Samples `n_samples` trajectories; sample `i` draws from stream
/// `SAMPLE_BASE + i` so generation order never matters.
pub fn spring_mass_dataset(
    sys: &SpringMassSystem,
    n_samples: usize,
    t_steps: usize,
    seed: u64,
) -> TrajectoryDataset {
    let n = sys.n_masses();
    let samples = (0..n_samples)
        .map(|i| {
            let mut rng = rng::stream(seed, streams::SAMPLE_BASE + i as u64);
            let x0: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut rng)).collect();
            let v0 = alloc::vec![0.0; n];
            let rows = sys.simulate(&x0, &v0, t_steps);
            let mut flat = Vec::with_capacity(t_steps * n);
            for row in rows {
                flat.extend_from_slice(&row);
            }
            flat
        })
        .collect();
    TrajectoryDataset {
        samples,
        n,
        t_steps,
        dt_sim_ms: sys.dt_sim_ms(),
        springs: sys.springs().to_vec(),
        seed,
    }
}

/// Burst-sequence-detection task specification: per class, three input
/// channels each carry one class-descriptive burst at a fixed time.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BsdSpec {
    pub n_classes: usize,
    pub n_inputs: usize,
    pub t_steps: usize,
    /// Per class: the three class-descriptive input indices.
    pub class_neurons: Vec<[usize; 3]>,
    /// Per class: the burst time of each descriptive input.
    pub class_times: Vec<[usize; 3]>,
    pub p_min: f64,
    pub p_max: f64,
    pub burst_window: [usize; 2],
    pub seed: u64,
}

impl BsdSpec {
    /// Draws class signatures; signatures are rejection-resampled until all
    /// classes differ in at least one (input, time) pair.
    pub fn generate(n_classes: usize, seed: u64) -> Result<Self, SystemsError> {
        Self::generate_with(n_classes, 10, 200, [20, 170], seed)
    }

    pub fn generate_with(
        n_classes: usize,
        n_inputs: usize,
        t_steps: usize,
        burst_window: [usize; 2],
        seed: u64,
    ) -> Result<Self, SystemsError> {
        if n_classes == 0 || n_inputs < 3 {
            return Err(SystemsError::Invalid(String::from("need >= 1 class and >= 3 inputs")));
        }
        if burst_window[1] >= t_steps || burst_window[0] > burst_window[1] {
            return Err(SystemsError::Invalid(String::from("burst window must fit the duration")));
        }
        let mut rng = rng::stream(seed, streams::CLASS_ASSIGNMENT);
        let mut class_neurons = Vec::with_capacity(n_classes);
        let mut class_times = Vec::with_capacity(n_classes);
        let mut signatures: Vec<[(usize, usize); 3]> = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            loop {
                let mut neurons = [0usize; 3];
                let mut picked = 0;
                while picked < 3 {
                    let candidate = rng.gen_range(0..n_inputs);
                    if !neurons[..picked].contains(&candidate) {
                        neurons[picked] = candidate;
                        picked += 1;
                    }
                }
                let mut times = [0usize; 3];
                for t in &mut times {
                    *t = rng.gen_range(burst_window[0]..=burst_window[1]);
                }
                let mut signature: [(usize, usize); 3] = [
                    (neurons[0], times[0]),
                    (neurons[1], times[1]),
                    (neurons[2], times[2]),
                ];
                signature.sort_unstable();
                if !signatures.contains(&signature) {
                    signatures.push(signature);
                    class_neurons.push(neurons);
                    class_times.push(times);
                    break;
                }
            }
        }
        Ok(Self {
            n_classes,
            n_inputs,
            t_steps,
            class_neurons,
            class_times,
            p_min: 0.05,
            p_max: 0.8,
            burst_window,
            seed,
        })
    }

    /// Spike probability for input `n` of a class-`c` sample, given that
    /// input's burst time.
    pub fn spike_probability(&self, t: usize, burst_time: usize) -> f64 {
        let d = t as f64 - burst_time as f64;
        let f = (-d * d / 4.0).exp();
        // f peaks at exactly 1 on the integer grid, so the normalizer is 1.
        f * (self.p_max - self.p_min) + self.p_min
    }
}

/// Binary spike-raster classification dataset with a fixed 70/10/20 split.
#[derive(Clone, Debug)]
pub struct BsdDataset {
    /// Row-major `t_steps x n_inputs` binary arrays.
    pub samples: Vec<Vec<u8>>,
    pub labels: Vec<usize>,
    pub spec: BsdSpec,
    pub n_train: usize,
    pub n_val: usize,
}

impl BsdDataset {
    pub fn train(&self) -> (&[Vec<u8>], &[usize]) {
        (&self.samples[..self.n_train], &self.labels[..self.n_train])
    }

    pub fn val(&self) -> (&[Vec<u8>], &[usize]) {
        let end = self.n_train + self.n_val;
        (&self.samples[self.n_train..end], &self.labels[self.n_train..end])
    }

    pub fn test(&self) -> (&[Vec<u8>], &[usize]) {
        let start = self.n_train + self.n_val;
        (&self.samples[start..], &self.labels[start..])
    }

    /// Mean spike rate over all samples, steps and inputs.
    pub fn mean_rate(&self) -> f64 {
        let total: u64 = self
            .samples
            .iter()
            .map(|s| s.iter().map(|&b| b as u64).sum::<u64>())
            .sum();
        total as f64 / (self.samples.len() * self.spec.t_steps * self.spec.n_inputs) as f64
    }
}

/// Generates `n_samples` BSD samples. The class and all Bernoulli draws of
/// sample `i` come from stream `SAMPLE_BASE + i`; the split is 70% train,
/// 10% validation, 20% test by index.
pub fn bsd_generate(spec: &BsdSpec, n_samples: usize, seed: u64) -> BsdDataset {
    let (t_steps, n_inputs) = (spec.t_steps, spec.n_inputs);
    let mut samples = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut rng = rng::stream(seed, streams::SAMPLE_BASE + i as u64);
        let class = rng.gen_range(0..spec.n_classes);
        // Burst time per input: pre-assigned for the class-descriptive
        // inputs, a fresh random time for every distractor.
        let mut burst_time = alloc::vec![0usize; n_inputs];
        for n in 0..n_inputs {
            burst_time[n] = match spec.class_neurons[class].iter().position(|&m| m == n) {
                Some(slot) => spec.class_times[class][slot],
                None => rng.gen_range(spec.burst_window[0]..=spec.burst_window[1]),
            };
        }
        let mut raster = alloc::vec![0u8; t_steps * n_inputs];
        for t in 0..t_steps {
            for n in 0..n_inputs {
                let p = spec.spike_probability(t, burst_time[n]);
                if rng.gen::<f64>() < p {
                    raster[t * n_inputs + n] = 1;
                }
            }
        }
        samples.push(raster);
        labels.push(class);
    }
    let n_train = n_samples * 7 / 10;
    let n_val = n_samples / 10;
    BsdDataset { samples, labels, spec: spec.clone(), n_train, n_val }
}
