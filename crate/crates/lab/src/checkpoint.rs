//! Checkpoint format: `checkpoint.json` (architecture, precision, task
//! provenance) next to `params.f64le`, the flat parameter vector in 64-bit
//! little-endian floats (lossless for both precisions).

use crate::config::TaskConfig;
use crate::{config_error, CliError};
use adlif_core::trainer::{Network, NetworkArch, Scalar};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub arch: NetworkArch,
    pub precision: String,
    pub n_params: usize,
    /// Task the network was trained on; lets downstream commands regenerate
    /// the matching data deterministically.
    pub task: Option<TaskConfig>,
    /// Time steps per sample the network was trained with.
    pub t_steps: usize,
    pub burn_in: f64,
    pub loss: String,
}

pub fn save<T: Scalar>(
    dir: &Path,
    net: &Network<T>,
    precision: &str,
    task: Option<TaskConfig>,
    t_steps: usize,
    burn_in: f64,
    loss: &str,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let manifest = CheckpointManifest {
        arch: net.arch().clone(),
        precision: precision.into(),
        n_params: net.n_params(),
        task,
        t_steps,
        burn_in: burn_in,
        loss: loss.into(),
    };
    fs::write(dir.join("checkpoint.json"), serde_json::to_string_pretty(&manifest)?)?;
    let mut bytes = Vec::with_capacity(net.n_params() * 8);
    for p in net.params() {
        bytes.extend_from_slice(&p.to_f64().unwrap().to_le_bytes());
    }
    fs::write(dir.join("params.f64le"), bytes)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<(CheckpointManifest, Network<f64>), CliError> {
    let manifest_path = dir.join("checkpoint.json");
    if !manifest_path.exists() {
        return Err(config_error(format!("missing checkpoint at {}", dir.display())));
    }
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let bytes = fs::read(dir.join("params.f64le"))?;
    if bytes.len() != manifest.n_params * 8 {
        return Err(config_error("parameter file size does not match the manifest"));
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect();
    let net = Network::from_params(manifest.arch.clone(), params);
    Ok((manifest, net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use adlif_core::trainer::{LayerSpec, NeuronKind, TauOut};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let arch = NetworkArch {
            input_dim: 4,
            layers: vec![LayerSpec::new(NeuronKind::SeAdLif, 10, true)],
            outputs: 3,
            tau_out: TauOut::Fixed(15.0),
            theta: 1.0,
            dt_ms: 1.0,
        };
        let net = Network::<f64>::init(arch, 11);
        save(dir.path(), &net, "f64", None, 200, 0.8, "sum_softmax_ce").unwrap();
        let (manifest, back) = load(dir.path()).unwrap();
        assert_eq!(back.params(), net.params());
        assert_eq!(manifest.t_steps, 200);
        assert!(load(Path::new("/nonexistent")).is_err());
    }
}
