//! BPTT training of layered recurrent spiking networks with the SLAYER
//! surrogate gradient, detached reset, parameter reparameterization and
//! clipping, ADAM, and the task losses.
//!
//! Gradients over a minibatch are computed per sample (optionally in
//! parallel) and reduced in index order, so results are identical no matter
//! how many threads run.

mod adam;
mod backprop;
mod loss;
mod net;

pub use adam::{clip_global_norm, global_norm, Adam};
pub use backprop::{
    backward, forward, DropoutPlan, ForwardOptions, ForwardTrace, Gradients, LayerTrace,
    NonFiniteActivation, SurrogateConfig,
};
pub use loss::{loss_and_grad, predict_class, BurnIn, LossKind, Target};
pub use net::{LayerLayout, LayerSpec, Layout, Network, NetworkArch, NeuronKind, TauOut};

use crate::neuron::NeuronParams;
use crate::rng::{self, streams};
use crate::stability;
use crate::systems::{BsdDataset, TrajectoryDataset};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_traits::Float;
use rand::seq::SliceRandom;

/// Floating-point type the trainer computes in (`f32` or `f64`).
pub trait Scalar:
    Float
    + num_traits::NumAssignOps
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Send
    + Sync
    + core::fmt::Debug
    + Default
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn sc<T: Scalar>(x: f64) -> T {
    T::from(x).expect("finite cast")
}

#[cfg(feature = "parallel")]
fn map_samples<I: Sync, O: Send, F: Fn(usize, &I) -> O + Sync>(items: &[&I], f: F) -> Vec<O> {
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, item)| f(i, item)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_samples<I: Sync, O: Send, F: Fn(usize, &I) -> O + Sync>(items: &[&I], f: F) -> Vec<O> {
    items.iter().enumerate().map(|(i, item)| f(i, item)).collect()
}

/// Sequence-classification data split into train/val/test.
#[derive(Clone, Debug)]
pub struct ClassificationTask<T> {
    pub t_steps: usize,
    pub input_dim: usize,
    pub n_classes: usize,
    pub train_x: Vec<Vec<T>>,
    pub train_y: Vec<usize>,
    pub val_x: Vec<Vec<T>>,
    pub val_y: Vec<usize>,
    pub test_x: Vec<Vec<T>>,
    pub test_y: Vec<usize>,
}

impl<T: Scalar> ClassificationTask<T> {
    pub fn from_bsd(data: &BsdDataset) -> Self {
        let convert = |samples: &[Vec<u8>]| -> Vec<Vec<T>> {
            samples
                .iter()
                .map(|s| s.iter().map(|&b| sc(b as f64)).collect())
                .collect()
        };
        let (train_x, train_y) = data.train();
        let (val_x, val_y) = data.val();
        let (test_x, test_y) = data.test();
        Self {
            t_steps: data.spec.t_steps,
            input_dim: data.spec.n_inputs,
            n_classes: data.spec.n_classes,
            train_x: convert(train_x),
            train_y: train_y.to_vec(),
            val_x: convert(val_x),
            val_y: val_y.to_vec(),
            test_x: convert(test_x),
            test_y: test_y.to_vec(),
        }
    }
}

/// Next-step-prediction data on trajectories, with the closed-loop switch
/// point of the task protocol.
#[derive(Clone, Debug)]
pub struct RegressionTask<T> {
    /// Trajectory length (the network runs `t_steps - 1` prediction steps).
    pub t_steps: usize,
    pub n_dims: usize,
    pub train: Vec<Vec<T>>,
    pub val: Vec<Vec<T>>,
    pub test: Vec<Vec<T>>,
    /// First input step fed from the network's own prediction.
    pub switch_step: usize,
}

impl<T: Scalar> RegressionTask<T> {
    /// Splits a trajectory dataset 80/10/10 and places the closed-loop
    /// switch at half the prediction steps.
    pub fn from_trajectories(data: &TrajectoryDataset) -> Self {
        let conv = |rows: &[Vec<f64>]| -> Vec<Vec<T>> {
            rows.iter().map(|r| r.iter().map(|&v| sc(v)).collect()).collect()
        };
        let n = data.samples.len();
        let n_train = n * 8 / 10;
        let n_val = n / 10;
        Self {
            t_steps: data.t_steps,
            n_dims: data.n,
            train: conv(&data.samples[..n_train]),
            val: conv(&data.samples[n_train..n_train + n_val]),
            test: conv(&data.samples[n_train + n_val..]),
            switch_step: (data.t_steps - 1) / 2,
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global L2 gradient-norm ceiling; `None` disables rescaling.
    pub grad_clip: Option<f64>,
    pub surrogate: SurrogateConfig,
    pub dropout: f64,
    pub loss: LossKind,
    pub burn_in: BurnIn,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 100,
            batch_size: 128,
            grad_clip: Some(1.5),
            surrogate: SurrogateConfig::default(),
            dropout: 0.0,
            loss: LossKind::SumSoftmaxCe,
            burn_in: BurnIn::Fraction(0.8),
            seed: 1,
        }
    }
}

/// One epoch of the training log.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub test_metric: f64,
    /// Mean pre-clip global gradient norm over the epoch's batches.
    pub grad_norm: f64,
    pub unstable_neurons: usize,
}

/// Why a run stopped early.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Divergence {
    pub epoch: usize,
    pub detail: String,
}

/// Full result of a training run. `best_params` holds the parameters at the
/// epoch with the best validation metric.
#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub log: Vec<EpochRow>,
    pub best_epoch: usize,
    pub best_val: f64,
    pub test_at_best: f64,
    pub best_params: Vec<T>,
    pub diverged: Option<Divergence>,
}

enum SampleResult<T> {
    Ok { loss: f64, grads: Gradients<T> },
    NonFinite(NonFiniteActivation),
}

/// Counts neurons whose current parameters put the sub-threshold dynamics at
/// or beyond the stability boundary (`r >= 1`).
pub fn unstable_neuron_count<T: Scalar>(net: &Network<T>) -> usize {
    let mut count = 0;
    for (l, spec) in net.arch().layers.iter().enumerate() {
        if !spec.kind.is_adaptive() {
            continue;
        }
        for i in 0..spec.size {
            let (tau_u, tau_w, a, _) = net.neuron_parameters(l, i);
            let params = NeuronParams::subthreshold(tau_u, tau_w, a, net.arch().dt_ms);
            if let Ok(analysis) = stability::closed_form_analysis(
                &params,
                spec.kind.scheme(),
                crate::neuron::DecayForm::Exponential,
            ) {
                if analysis.r >= 1.0 {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Mean classification accuracy of the network on `(x, y)`.
pub fn eval_classifier<T: Scalar>(
    net: &Network<T>,
    x: &[Vec<T>],
    y: &[usize],
    t_steps: usize,
    kind: LossKind,
    burn_in: BurnIn,
) -> f64 {
    let refs: Vec<&Vec<T>> = x.iter().collect();
    let n_out = net.arch().outputs;
    let correct: usize = map_samples(&refs, |i, sample| {
        let trace = forward(net, sample, t_steps, &ForwardOptions::default());
        match trace {
            Ok(trace) => (predict_class(trace.outputs(), n_out, kind, burn_in) == y[i]) as usize,
            Err(_) => 0,
        }
    })
    .into_iter()
    .sum();
    correct as f64 / x.len().max(1) as f64
}

/// Protocol MSE (teacher-forced then closed-loop) of the network on
/// trajectories.
pub fn eval_regressor<T: Scalar>(
    net: &Network<T>,
    trajectories: &[Vec<T>],
    t_steps: usize,
    switch_step: usize,
) -> f64 {
    let n = net.arch().outputs;
    let refs: Vec<&Vec<T>> = trajectories.iter().collect();
    let losses = map_samples(&refs, |_, sample| {
        let steps = t_steps - 1;
        let opts = ForwardOptions { autoregress_from: Some(switch_step), dropout: None };
        match forward(net, &sample[..steps * n], steps, &opts) {
            Ok(trace) => {
                let (loss, _) = loss_and_grad(
                    trace.outputs(),
                    n,
                    Target::Dense(&sample[n..]),
                    LossKind::Mse,
                    BurnIn::Steps(0),
                );
                loss
            }
            Err(_) => f64::INFINITY,
        }
    });
    losses.iter().sum::<f64>() / losses.len().max(1) as f64
}

/// Trains a classifier; epoch metrics are accuracies (higher is better).
pub fn train_classifier<T: Scalar>(
    net: &mut Network<T>,
    task: &ClassificationTask<T>,
    cfg: &TrainConfig,
) -> TrainOutcome<T> {
    let n_out = net.arch().outputs;
    assert_eq!(n_out, task.n_classes, "readout width must match the class count");
    let run = |net: &Network<T>, idx: usize, sample: &Vec<T>, label: usize, epoch: usize| {
        let dropout = (cfg.dropout > 0.0).then_some(DropoutPlan {
            rate: cfg.dropout,
            seed: cfg.seed,
            stream: streams::DROPOUT_BASE
                .wrapping_add((epoch as u64) << 24)
                .wrapping_add(idx as u64),
        });
        let opts = ForwardOptions { autoregress_from: None, dropout };
        match forward(net, sample, task.t_steps, &opts) {
            Ok(trace) => {
                let (loss, gy) =
                    loss_and_grad(trace.outputs(), n_out, Target::Class(label), cfg.loss, cfg.burn_in);
                let grads = backward(net, &trace, &gy, &cfg.surrogate);
                SampleResult::Ok { loss, grads }
            }
            Err(e) => SampleResult::NonFinite(e),
        }
    };
    train_loop(
        net,
        cfg,
        task.train_x.len(),
        run_adapter(&task.train_x, &task.train_y, run),
        |net| eval_classifier(net, &task.val_x, &task.val_y, task.t_steps, cfg.loss, cfg.burn_in),
        |net| eval_classifier(net, &task.test_x, &task.test_y, task.t_steps, cfg.loss, cfg.burn_in),
        MetricDirection::HigherIsBetter,
    )
}

/// Trains a next-step predictor under the teacher-forced/closed-loop
/// protocol; epoch metrics are protocol MSEs (lower is better).
pub fn train_regressor<T: Scalar>(
    net: &mut Network<T>,
    task: &RegressionTask<T>,
    cfg: &TrainConfig,
) -> TrainOutcome<T> {
    let n = net.arch().outputs;
    assert_eq!(n, task.n_dims, "readout width must match the trajectory dimension");
    assert_eq!(net.arch().input_dim, task.n_dims);
    let steps = task.t_steps - 1;
    let switch = task.switch_step;
    let run = move |net: &Network<T>, idx: usize, sample: &Vec<T>, _label: usize, epoch: usize| {
        let dropout = (cfg.dropout > 0.0).then_some(DropoutPlan {
            rate: cfg.dropout,
            seed: cfg.seed,
            stream: streams::DROPOUT_BASE
                .wrapping_add((epoch as u64) << 24)
                .wrapping_add(idx as u64),
        });
        let opts = ForwardOptions { autoregress_from: Some(switch), dropout };
        match forward(net, &sample[..steps * n], steps, &opts) {
            Ok(trace) => {
                let (loss, gy) = loss_and_grad(
                    trace.outputs(),
                    n,
                    Target::Dense(&sample[n..]),
                    LossKind::Mse,
                    cfg.burn_in,
                );
                let grads = backward(net, &trace, &gy, &cfg.surrogate);
                SampleResult::Ok { loss, grads }
            }
            Err(e) => SampleResult::NonFinite(e),
        }
    };
    let zeros = alloc::vec![0usize; task.train.len()];
    let task_train = &task.train;
    train_loop(
        net,
        cfg,
        task.train.len(),
        move |net, indices, epoch| {
            let selected: Vec<&Vec<T>> = indices.iter().map(|&i| &task_train[i]).collect();
            map_samples(&selected, |pos, sample| {
                run(net, indices[pos], sample, zeros[0], epoch)
            })
        },
        |net| eval_regressor(net, &task.val, task.t_steps, switch),
        |net| eval_regressor(net, &task.test, task.t_steps, switch),
        MetricDirection::LowerIsBetter,
    )
}

enum MetricDirection {
    HigherIsBetter,
    LowerIsBetter,
}

fn run_adapter<'a, T: Scalar, F>(
    x: &'a [Vec<T>],
    y: &'a [usize],
    run: F,
) -> impl Fn(&Network<T>, &[usize], usize) -> Vec<SampleResult<T>> + 'a
where
    F: Fn(&Network<T>, usize, &Vec<T>, usize, usize) -> SampleResult<T> + Sync + 'a,
{
    move |net, indices, epoch| {
        let selected: Vec<&Vec<T>> = indices.iter().map(|&i| &x[i]).collect();
        map_samples(&selected, |pos, sample| {
            run(net, indices[pos], sample, y[indices[pos]], epoch)
        })
    }
}

fn train_loop<T: Scalar>(
    net: &mut Network<T>,
    cfg: &TrainConfig,
    n_train: usize,
    run_batch: impl Fn(&Network<T>, &[usize], usize) -> Vec<SampleResult<T>>,
    eval_val: impl Fn(&Network<T>) -> f64,
    eval_test: impl Fn(&Network<T>) -> f64,
    direction: MetricDirection,
) -> TrainOutcome<T> {
    let mut adam = Adam::new(net.n_params());
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0usize;
    let mut best_val = match direction {
        MetricDirection::HigherIsBetter => f64::NEG_INFINITY,
        MetricDirection::LowerIsBetter => f64::INFINITY,
    };
    let mut test_at_best = f64::NAN;
    let mut best_params = net.params().to_vec();
    let mut diverged = None;

    'epochs: for epoch in 0..cfg.epochs {
        let mut indices: Vec<usize> = (0..n_train).collect();
        let mut shuffle_rng = rng::stream(cfg.seed, streams::SHUFFLE_BASE + epoch as u64);
        indices.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut epoch_norm = 0.0;
        let mut n_batches = 0usize;
        for batch in indices.chunks(cfg.batch_size.max(1)) {
            let results = run_batch(net, batch, epoch);
            let mut batch_grads = alloc::vec![T::zero(); net.n_params()];
            let mut batch_loss = 0.0;
            for result in &results {
                match result {
                    SampleResult::Ok { loss, grads } => {
                        batch_loss += loss;
                        for (acc, &g) in batch_grads.iter_mut().zip(&grads.params) {
                            *acc += g;
                        }
                    }
                    SampleResult::NonFinite(e) => {
                        diverged = Some(Divergence { epoch, detail: format!("{e}") });
                        break 'epochs;
                    }
                }
            }
            let inv = sc::<T>(1.0 / batch.len() as f64);
            for g in batch_grads.iter_mut() {
                *g *= inv;
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() || !global_norm(&batch_grads).is_finite() {
                diverged =
                    Some(Divergence { epoch, detail: String::from("non-finite loss or gradient") });
                break 'epochs;
            }
            let norm = match cfg.grad_clip {
                Some(max) => clip_global_norm(&mut batch_grads, max),
                None => global_norm(&batch_grads),
            };
            adam.step(net.params_mut(), &batch_grads, cfg.lr);
            net.clip_params();
            epoch_loss += batch_loss;
            epoch_norm += norm;
            n_batches += 1;
        }

        let val_metric = eval_val(net);
        let test_metric = eval_test(net);
        let improved = match direction {
            MetricDirection::HigherIsBetter => val_metric > best_val,
            MetricDirection::LowerIsBetter => val_metric < best_val,
        };
        if improved {
            best_val = val_metric;
            best_epoch = epoch;
            test_at_best = test_metric;
            best_params.copy_from_slice(net.params());
        }
        log.push(EpochRow {
            epoch,
            train_loss: epoch_loss / n_batches.max(1) as f64,
            val_metric,
            test_metric,
            grad_norm: epoch_norm / n_batches.max(1) as f64,
            unstable_neurons: unstable_neuron_count(net),
        });
    }

    TrainOutcome { log, best_epoch, best_val, test_at_best, best_params, diverged }
}

/// Mean-squared error per time bucket; shared by the closed-loop report and
/// its tests.
pub fn bucketed_mse(per_step_sq_err: &[f64], bucket_steps: usize) -> Vec<f64> {
    per_step_sq_err
        .chunks(bucket_steps)
        .map(|chunk| chunk.iter().sum::<f64>() / chunk.len() as f64)
        .collect()
}

/// Closed-loop evaluation report.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutoregressReport {
    pub bucket_ms: f64,
    pub bucket_mse: Vec<f64>,
    /// MSE of the all-zero predictor over the closed-loop window.
    pub baseline_mse: f64,
    /// Time (ms after the switch) until the bucket MSE first reaches the
    /// baseline; the full window length if it never does.
    pub degradation_ms: f64,
    pub autoregressive_mse: f64,
}

/// Runs the teacher-forced/closed-loop protocol on fresh trajectories and
/// reports the bucketed MSE of the closed-loop half.
pub fn autoregress_eval<T: Scalar>(
    net: &Network<T>,
    trajectories: &[Vec<T>],
    t_steps: usize,
    switch_step: usize,
    bucket_steps: usize,
) -> AutoregressReport {
    let n = net.arch().outputs;
    let steps = t_steps - 1;
    let refs: Vec<&Vec<T>> = trajectories.iter().collect();
    let per_sample: Vec<(Vec<f64>, Vec<f64>)> = map_samples(&refs, |_, sample| {
        let opts = ForwardOptions { autoregress_from: Some(switch_step), dropout: None };
        let mut sq = alloc::vec![f64::INFINITY; steps - switch_step];
        let mut base = alloc::vec![0.0f64; steps - switch_step];
        if let Ok(trace) = forward(net, &sample[..steps * n], steps, &opts) {
            for k in switch_step..steps {
                let mut e = 0.0;
                let mut b = 0.0;
                for c in 0..n {
                    let target = sample[(k + 1) * n + c].to_f64().unwrap();
                    let pred = trace.y[k * n + c].to_f64().unwrap();
                    e += (pred - target) * (pred - target);
                    b += target * target;
                }
                sq[k - switch_step] = e / n as f64;
                base[k - switch_step] = b / n as f64;
            }
        }
        (sq, base)
    });
    let window = steps - switch_step;
    let mut sq_mean = alloc::vec![0.0f64; window];
    let mut base_mean = alloc::vec![0.0f64; window];
    for (sq, base) in &per_sample {
        for i in 0..window {
            sq_mean[i] += sq[i];
            base_mean[i] += base[i];
        }
    }
    let count = per_sample.len().max(1) as f64;
    for i in 0..window {
        sq_mean[i] /= count;
        base_mean[i] /= count;
    }
    let bucket_mse = bucketed_mse(&sq_mean, bucket_steps);
    let baseline_mse = base_mean.iter().sum::<f64>() / window.max(1) as f64;
    let dt = net.arch().dt_ms;
    let bucket_ms = bucket_steps as f64 * dt;
    let degradation_ms = bucket_mse
        .iter()
        .position(|&m| m >= baseline_mse)
        .map_or(window as f64 * dt, |idx| idx as f64 * bucket_ms);
    let autoregressive_mse = sq_mean.iter().sum::<f64>() / window.max(1) as f64;
    AutoregressReport { bucket_ms, bucket_mse, baseline_mse, degradation_ms, autoregressive_mse }
}
