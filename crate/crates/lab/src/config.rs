//! JSON experiment configurations.
//!
//! A training config mirrors the hyperparameter-table columns (learning
//! rate, layer sizes, reparameterization coefficient, surrogate shape,
//! epochs, time-constant ranges, dropout, readout time constant, batch
//! size) plus a task block that either generates a dataset deterministically
//! or points at one on disk.

use crate::{config_error, CliError};
use adlif_core::trainer::{
    BurnIn, LayerSpec, LossKind, NetworkArch, NeuronKind, SurrogateConfig, TauOut, TrainConfig,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    /// Burst-sequence classification, generated deterministically.
    Bsd {
        n_classes: usize,
        n_samples: usize,
        seed: u64,
    },
    /// Burst-sequence classification from a dataset directory.
    BsdFile { path: String },
    /// Spring-mass next-step prediction, generated deterministically.
    SpringMass {
        n_masses: usize,
        spring_range: [f64; 2],
        n_samples: usize,
        t_steps: usize,
        seed: u64,
    },
    /// Spring-mass prediction from a dataset directory.
    SpringMassFile { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub neuron: String,
    pub hidden: Vec<usize>,
    #[serde(default = "default_true")]
    pub recurrent: bool,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_tau_u")]
    pub tau_u_range: [f64; 2],
    #[serde(default = "default_tau_w")]
    pub tau_w_range: [f64; 2],
    #[serde(default = "default_a_hat")]
    pub a_hat_range: [f64; 2],
    #[serde(default = "default_b_hat")]
    pub b_hat_range: [f64; 2],
    /// Scalar = fixed; two-element array = trainable range.
    pub tau_out: serde_json::Value,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_dt")]
    pub dt_ms: f64,
}

fn default_true() -> bool {
    true
}
fn default_q() -> f64 {
    120.0
}
fn default_tau_u() -> [f64; 2] {
    [5.0, 25.0]
}
fn default_tau_w() -> [f64; 2] {
    [60.0, 300.0]
}
fn default_a_hat() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_b_hat() -> [f64; 2] {
    [0.0, 2.0]
}
fn default_theta() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `null` disables gradient rescaling.
    #[serde(default = "default_clip")]
    pub grad_clip: Option<f64>,
    #[serde(default = "default_slayer_alpha")]
    pub slayer_alpha: f64,
    #[serde(default = "default_slayer_c")]
    pub slayer_c: f64,
    #[serde(default)]
    pub dropout: f64,
    pub loss: String,
    /// Fraction in [0,1] or absolute step count.
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// "f32" or "f64" (default).
    #[serde(default = "default_precision")]
    pub precision: String,
}

fn default_clip() -> Option<f64> {
    Some(1.5)
}
fn default_slayer_alpha() -> f64 {
    5.0
}
fn default_slayer_c() -> f64 {
    0.4
}
fn default_seed() -> u64 {
    1
}
fn default_precision() -> String {
    "f64".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainFileConfig {
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub train: TrainParams,
}

impl TrainFileConfig {
    pub fn network_arch(&self, input_dim: usize, outputs: usize) -> Result<NetworkArch, CliError> {
        let kind = parse_neuron_kind(&self.model.neuron)?;
        let layers = self
            .model
            .hidden
            .iter()
            .map(|&size| {
                let mut spec = LayerSpec::new(kind, size, self.model.recurrent);
                spec.q = self.model.q;
                spec.tau_u_range = self.model.tau_u_range;
                spec.tau_w_range = self.model.tau_w_range;
                spec.a_hat_range = self.model.a_hat_range;
                spec.b_hat_range = self.model.b_hat_range;
                spec
            })
            .collect();
        Ok(NetworkArch {
            input_dim,
            layers,
            outputs,
            tau_out: parse_tau_out(&self.model.tau_out)?,
            theta: self.model.theta,
            dt_ms: self.model.dt_ms,
        })
    }

    pub fn trainer_config(&self, t_steps: usize) -> Result<TrainConfig, CliError> {
        let burn_in = if self.train.burn_in < 1.0 {
            BurnIn::Fraction(self.train.burn_in)
        } else {
            BurnIn::Steps(self.train.burn_in as usize)
        };
        let _ = t_steps;
        Ok(TrainConfig {
            lr: self.train.lr,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            grad_clip: self.train.grad_clip,
            surrogate: SurrogateConfig { alpha: self.train.slayer_alpha, c: self.train.slayer_c },
            dropout: self.train.dropout,
            loss: parse_loss(&self.train.loss)?,
            burn_in,
            seed: self.train.seed,
        })
    }
}

pub fn parse_neuron_kind(name: &str) -> Result<NeuronKind, CliError> {
    match name {
        "lif" => Ok(NeuronKind::Lif),
        "ef_adlif" | "ef" => Ok(NeuronKind::EfAdLif),
        "se_adlif" | "se" => Ok(NeuronKind::SeAdLif),
        other => Err(config_error(format!("unknown neuron kind '{other}'"))),
    }
}

pub fn parse_loss(name: &str) -> Result<LossKind, CliError> {
    match name {
        "sum_softmax_ce" => Ok(LossKind::SumSoftmaxCe),
        "softmax_sum_ce" => Ok(LossKind::SoftmaxSumCe),
        "per_step_ce" => Ok(LossKind::PerStepCe),
        "mse" => Ok(LossKind::Mse),
        other => Err(config_error(format!("unknown loss '{other}'"))),
    }
}

fn parse_tau_out(value: &serde_json::Value) -> Result<TauOut, CliError> {
    if let Some(v) = value.as_f64() {
        return Ok(TauOut::Fixed(v));
    }
    if let Some(arr) = value.as_array() {
        if arr.len() == 2 {
            let lo = arr[0].as_f64().ok_or_else(|| config_error("tau_out range must be numeric"))?;
            let hi = arr[1].as_f64().ok_or_else(|| config_error("tau_out range must be numeric"))?;
            return Ok(TauOut::Trainable([lo, hi]));
        }
    }
    Err(config_error("tau_out must be a number or a two-element range"))
}

/// Loads a config file; a run manifest (with an embedded `config` object) is
/// accepted too, making every run reproducible from its manifest alone.
pub fn load_config<C: for<'de> Deserialize<'de>>(path: &Path) -> Result<C, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let config_value = match value.get("config") {
        Some(embedded) => embedded.clone(),
        None => value,
    };
    serde_json::from_value(config_value).map_err(|e| config_error(format!("bad config: {e}")))
}
