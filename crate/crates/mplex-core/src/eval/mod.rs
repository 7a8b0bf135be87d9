//! Evaluation protocol: classification F1, clustering agreement (hard,
//! cluster-membership, and overlapping variants), and label-based similarity
//! search over learned embeddings.

mod classify;
mod cluster;
mod nmi;
mod search;

pub use classify::f1_scores;
pub use cluster::{fuzzy_cmeans, kmeans, nmi_c, nmi_n, top_q_cover, NmiC};
pub use nmi::{nmi, onmi};
pub use search::similarity_search;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math::Real;

/// Retrieval depths reported by similarity search.
pub const SEARCH_KS: [usize; 5] = [5, 10, 20, 50, 100];

/// Errors raised by the evaluation routines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// Metrics need at least one evaluated node.
    EmptyTestSet,
    /// Clustering needs at least two clusters.
    BadClusterCount { k: usize },
    /// More clusters requested than points available.
    TooManyClusters { k: usize, points: usize },
    /// Overlapping scores need at least one nonempty community per cover.
    EmptyCover,
    /// Similarity search cannot rank a zero-norm embedding.
    ZeroNormEmbedding { node: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyTestSet => write!(f, "evaluation needs a nonempty node set"),
            EvalError::BadClusterCount { k } => {
                write!(f, "clustering needs at least 2 clusters, got {k}")
            }
            EvalError::TooManyClusters { k, points } => {
                write!(f, "cannot form {k} clusters from {points} points")
            }
            EvalError::EmptyCover => write!(f, "overlapping score needs nonempty covers"),
            EvalError::ZeroNormEmbedding { node } => {
                write!(f, "node {node} has a zero-norm embedding; cosine undefined")
            }
        }
    }
}

impl core::error::Error for EvalError {}

/// Full evaluation outcome for one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Classification Micro-F1, in percent.
    pub micro_f1: Real,
    /// Classification Macro-F1, in percent.
    pub macro_f1: Real,
    /// Agreement of embedding clusters with ground truth, in [0, 1].
    pub nmi_n: Real,
    /// Agreement of the mean learned cluster memberships, in [0, 1].
    pub nmi_c: Real,
    /// Per-relation membership agreement.
    pub nmi_c_per_relation: Vec<Real>,
    /// Overlapping variant of `nmi_n` (multi-label runs only).
    pub onmi: Option<Real>,
    /// Mean retrieval precision per depth.
    pub sim_search: BTreeMap<usize, Real>,
    /// Hash of the resolved configuration that produced the model.
    pub config_hash: String,
    /// Seed of the node split the metrics were computed on.
    pub split_seed: u64,
    /// Free-form caveats (e.g. skipped metrics and why).
    pub notes: Vec<String>,
}
