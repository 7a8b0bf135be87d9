//! Run directories and their manifest.
//!
//! Every command that trains writes its artifacts into a fresh directory
//! under the runs root: the resolved configuration, the per-epoch loss log,
//! best and last checkpoints, exported consensus embeddings, the evaluation
//! report in JSON and text form, and finally a manifest with a SHA-256
//! checksum of each artifact. Timings in the manifest vary between runs;
//! `log.csv` is the determinism artifact and is byte-identical for
//! identical (dataset, config, seed).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use mplex_core::tensor::DenseMatrix;
use mplex_core::trainer::{TrainConfig, TrainLog};

/// File name of the manifest inside a run directory.
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {what}")]
    BadManifest { path: PathBuf, what: String },
    #[error("{name} does not match its manifest checksum")]
    ChecksumMismatch { name: String },
}

/// What a run was, where it ran, and what it left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand that produced the run, e.g. `train`.
    pub command: String,
    /// Fully resolved configuration (defaults, file, and flags applied).
    pub config: TrainConfig,
    /// Dataset directory the run read from.
    pub dataset: String,
    /// Run directory, as created.
    pub run_dir: String,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// SHA-256 per artifact file, excluding the manifest itself.
    pub checksums: BTreeMap<String, String>,
    /// Manifest creation time, seconds since the Unix epoch.
    pub created_unix: u64,
}

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Root directory new runs go under: explicit flag, else `MPLEX_RUNS`,
/// else `./runs`.
pub fn runs_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(env) = std::env::var_os("MPLEX_RUNS") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("runs")
}

/// Create `root/name`, appending `-2`, `-3`, … if the name is taken.
pub fn create_run_dir(root: &Path, name: &str) -> Result<PathBuf, RunDirError> {
    std::fs::create_dir_all(root).map_err(|source| RunDirError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut candidate = root.join(name);
    let mut attempt = 1usize;
    loop {
        match std::fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                attempt += 1;
                candidate = root.join(format!("{name}-{attempt}"));
            }
            Err(source) => {
                return Err(RunDirError::Io {
                    path: candidate,
                    source,
                })
            }
        }
    }
}

/// Write a file inside a run directory.
pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<(), RunDirError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| RunDirError::Io { path, source })
}

/// Write a value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), RunDirError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(dir, name, &text)
}

/// Per-epoch loss log as CSV. Floats use shortest round-trip form, so the
/// file is byte-identical across runs with the same inputs.
pub fn log_csv(log: &TrainLog) -> String {
    let mut out = String::from("epoch,mi,cross,cons,clus_learn,clus_orth,sup,total,val_micro_f1\n");
    for e in &log.epochs {
        let l = &e.losses;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.epoch, l.mi, l.cross, l.cons, l.clus_learn, l.clus_orth, l.sup, l.total, e.val_micro_f1
        );
    }
    out
}

/// Consensus embeddings as TSV: node id, then one column per dimension.
pub fn embeddings_tsv(consensus: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..consensus.rows() {
        let _ = write!(out, "{i}");
        for &v in consensus.row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

/// Checksum every regular file in the run directory except the manifest.
pub fn collect_checksums(dir: &Path) -> Result<BTreeMap<String, String>, RunDirError> {
    let mut sums = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|source| RunDirError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| RunDirError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE {
            continue;
        }
        let bytes = std::fs::read(&path).map_err(|source| RunDirError::Io { path, source })?;
        sums.insert(name, sha256_hex(&bytes));
    }
    Ok(sums)
}

/// Checksum the directory's artifacts and write the manifest.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: &TrainConfig,
    dataset: &Path,
    timings: BTreeMap<String, f64>,
) -> Result<RunManifest, RunDirError> {
    let manifest = RunManifest {
        command: command.to_string(),
        config: config.clone(),
        dataset: dataset.display().to_string(),
        run_dir: dir.display().to_string(),
        timings,
        checksums: collect_checksums(dir)?,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(dir, MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}

/// Load a manifest and verify every recorded checksum against the files.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest, RunDirError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| RunDirError::Io {
        path: path.clone(),
        source,
    })?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| RunDirError::BadManifest {
            path,
            what: e.to_string(),
        })?;
    for (name, expected) in &manifest.checksums {
        let file = dir.join(name);
        let bytes = std::fs::read(&file).map_err(|source| RunDirError::Io { path: file, source })?;
        if &sha256_hex(&bytes) != expected {
            return Err(RunDirError::ChecksumMismatch { name: name.clone() });
        }
    }
    Ok(manifest)
}
