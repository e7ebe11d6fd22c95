//! On-disk dataset format: a JSON manifest plus flat little-endian arrays.
//!
//! A dataset directory contains `dataset.json` describing shapes, dtypes and
//! provenance, next to raw array files: 32-bit little-endian floats for real
//! data (`.f32le`), one byte per element for binary data (`.u8`).

use crate::{config_error, CliError};
use adlif_core::systems::{BsdDataset, BsdSpec, TrajectoryDataset};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrayRef {
    pub file: String,
    pub dtype: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetManifest {
    Bsd {
        spec: BsdSpec,
        n_samples: usize,
        n_train: usize,
        n_val: usize,
        seed: u64,
        samples: ArrayRef,
        labels: ArrayRef,
    },
    SpringMass {
        n_masses: usize,
        t_steps: usize,
        dt_sim_ms: f64,
        springs: Vec<f64>,
        seed: u64,
        n_samples: usize,
        trajectories: ArrayRef,
    },
}

fn write_f32le(path: &Path, values: impl Iterator<Item = f32>) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)
}

fn read_f32le(path: &Path) -> Result<Vec<f32>, CliError> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(config_error(format!("{} is not a f32le array", path.display())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_bsd(dir: &Path, data: &BsdDataset, seed: u64) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let t = data.spec.t_steps;
    let n = data.spec.n_inputs;
    let mut raster = Vec::with_capacity(data.samples.len() * t * n);
    for sample in &data.samples {
        raster.extend_from_slice(sample);
    }
    fs::write(dir.join("samples.u8"), &raster)?;
    let labels: Vec<u8> = data.labels.iter().map(|&l| l as u8).collect();
    fs::write(dir.join("labels.u8"), &labels)?;
    let manifest = DatasetManifest::Bsd {
        spec: data.spec.clone(),
        n_samples: data.samples.len(),
        n_train: data.n_train,
        n_val: data.n_val,
        seed,
        samples: ArrayRef {
            file: "samples.u8".into(),
            dtype: "u8".into(),
            shape: vec![data.samples.len(), t, n],
        },
        labels: ArrayRef {
            file: "labels.u8".into(),
            dtype: "u8".into(),
            shape: vec![data.samples.len()],
        },
    };
    fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_bsd(dir: &Path) -> Result<BsdDataset, CliError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("dataset.json"))?)?;
    let DatasetManifest::Bsd { spec, n_samples, n_train, n_val, samples, labels, .. } = manifest
    else {
        return Err(config_error("dataset is not a burst-sequence dataset"));
    };
    let raster = fs::read(dir.join(&samples.file))?;
    let per_sample = spec.t_steps * spec.n_inputs;
    if raster.len() != n_samples * per_sample {
        return Err(config_error("sample array size does not match the manifest"));
    }
    let samples: Vec<Vec<u8>> =
        raster.chunks_exact(per_sample).map(|chunk| chunk.to_vec()).collect();
    let labels: Vec<usize> = fs::read(dir.join(&labels.file))?.iter().map(|&b| b as usize).collect();
    if labels.len() != n_samples {
        return Err(config_error("label array size does not match the manifest"));
    }
    Ok(BsdDataset { samples, labels, spec, n_train, n_val })
}

pub fn write_spring_mass(dir: &Path, data: &TrajectoryDataset) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write_f32le(
        &dir.join("trajectories.f32le"),
        data.samples.iter().flat_map(|s| s.iter().map(|&v| v as f32)),
    )?;
    let manifest = DatasetManifest::SpringMass {
        n_masses: data.n,
        t_steps: data.t_steps,
        dt_sim_ms: data.dt_sim_ms,
        springs: data.springs.clone(),
        seed: data.seed,
        n_samples: data.samples.len(),
        trajectories: ArrayRef {
            file: "trajectories.f32le".into(),
            dtype: "f32le".into(),
            shape: vec![data.samples.len(), data.t_steps, data.n],
        },
    };
    fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_spring_mass(dir: &Path) -> Result<TrajectoryDataset, CliError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("dataset.json"))?)?;
    let DatasetManifest::SpringMass {
        n_masses,
        t_steps,
        dt_sim_ms,
        springs,
        seed,
        n_samples,
        trajectories,
    } = manifest
    else {
        return Err(config_error("dataset is not a spring-mass dataset"));
    };
    let flat = read_f32le(&dir.join(&trajectories.file))?;
    let per_sample = t_steps * n_masses;
    if flat.len() != n_samples * per_sample {
        return Err(config_error("trajectory array size does not match the manifest"));
    }
    let samples = flat
        .chunks_exact(per_sample)
        .map(|chunk| chunk.iter().map(|&v| v as f64).collect())
        .collect();
    Ok(TrajectoryDataset { samples, n: n_masses, t_steps, dt_sim_ms, springs, seed })
}
