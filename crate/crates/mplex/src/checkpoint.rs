//! Model checkpoints: the resolved training config, the split seed, and
//! every parameter tensor, as one JSON file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mplex_core::graph::MultiplexGraph;
use mplex_core::model::ModelParams;
use mplex_core::trainer::TrainConfig;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {what}")]
    BadJson { path: PathBuf, what: String },
    #[error("checkpoint does not fit the dataset: {dimension} is {found}, dataset has {expected}")]
    Dimension {
        dimension: &'static str,
        expected: usize,
        found: usize,
    },
}

/// A trained model together with everything needed to re-evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Seed of the split the model was trained on.
    pub split_seed: u64,
    pub params: ModelParams,
}

impl Checkpoint {
    /// Verifies that the stored parameter shapes match the dataset.
    pub fn check_against(&self, g: &MultiplexGraph) -> Result<(), CheckpointError> {
        let dims = self.params.dims;
        let pairs = [
            ("num_nodes", g.num_nodes(), dims.nodes),
            ("num_features", g.num_features(), dims.features),
            ("num_labels", g.num_labels(), dims.labels),
            ("num_relations", g.num_relations(), dims.relations),
        ];
        for (dimension, expected, found) in pairs {
            if expected != found {
                return Err(CheckpointError::Dimension {
                    dimension,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), CheckpointError> {
    let json = serde_json::to_string(checkpoint).expect("checkpoint serializes");
    std::fs::write(path, json).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let raw = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|e| CheckpointError::BadJson {
        path: path.to_path_buf(),
        what: e.to_string(),
    })
}
