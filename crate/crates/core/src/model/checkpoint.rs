//! Checkpoint directory: `manifest.json` plus one `<name>.tsv` per tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, PqGcnParams};
use crate::nn::io::{read_tensor, write_tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PqGcnParams,
    pub config: ModelConfig,
    /// Config hash of the bundle the parameters were trained on.
    pub bundle_hash: String,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    bundle_hash: String,
    best_epoch: usize,
    epochs_run: usize,
    config: ModelConfig,
    params: Vec<ManifestParam>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestParam {
    name: String,
    rows: usize,
    cols: usize,
}

pub fn save_checkpoint(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        bundle_hash: ckpt.bundle_hash.clone(),
        best_epoch: ckpt.best_epoch,
        epochs_run: ckpt.epochs_run,
        config: ckpt.config.clone(),
        params: ckpt
            .params
            .names
            .iter()
            .zip(&ckpt.params.values)
            .map(|(name, t)| ManifestParam {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    for (name, t) in ckpt.params.names.iter().zip(&ckpt.params.values) {
        write_tensor(&dir.join(format!("{name}.tsv")), t)?;
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Model(format!("corrupt checkpoint manifest {}: {e}", path.display())))?;
    let mut names = Vec::new();
    let mut values = Vec::new();
    for p in m.params {
        let file = dir.join(format!("{}.tsv", p.name));
        let t = read_tensor(&file)?;
        if t.shape() != (p.rows, p.cols) {
            return Err(Error::Model(format!(
                "{}: shape {:?} differs from manifest ({}, {})",
                file.display(),
                t.shape(),
                p.rows,
                p.cols
            )));
        }
        names.push(p.name);
        values.push(t);
    }
    Ok(Checkpoint {
        params: PqGcnParams { names, values },
        config: m.config,
        bundle_hash: m.bundle_hash,
        best_epoch: m.best_epoch,
        epochs_run: m.epochs_run,
    })
}
