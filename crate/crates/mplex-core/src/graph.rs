//! Multiplex networks, node splits, and the graph kernels the model consumes.
//!
//! A multiplex network keeps one intra-layer adjacency per relation over a
//! shared node set, optional cross-layer adjacencies between relation pairs,
//! node features, and a partially labeled 0/1 label matrix.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::math::{self, Real};
use crate::rng::{self, Domain};
use crate::tensor::{DenseMatrix, SparseMatrix, TensorError};

/// Errors raised while validating graphs, splits, or kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    /// Multiplex networks need at least two relations.
    NotEnoughRelations { found: usize },
    /// An adjacency matrix has the wrong shape.
    BadAdjacencyShape {
        relation: String,
        rows: usize,
        cols: usize,
        nodes: usize,
    },
    /// An adjacency weight is negative.
    NegativeWeight { relation: String },
    /// Features or labels row count disagrees with the node count.
    BadMatrixRows {
        what: &'static str,
        rows: usize,
        nodes: usize,
    },
    /// A label entry is neither 0 nor 1.
    LabelBitInvalid { node: usize },
    /// A labeled node has no label bit set.
    LabelRowEmpty { node: usize },
    /// A single-label graph has a labeled row with several bits set.
    MultipleBitsSingleLabel { node: usize },
    /// A node id is out of range.
    NodeOutOfRange { node: usize, nodes: usize },
    /// Too few labeled nodes to build train, val, and test sets.
    NotEnoughLabeled { labeled: usize },
    /// A split part came out empty.
    EmptySplitPart { part: &'static str },
    /// Self-loop weight must be strictly positive.
    BadEpsilon { value: Real },
    /// The Laplacian needs a symmetric input.
    AsymmetricKernel,
    /// A train node is not labeled.
    TrainNotLabeled { node: usize },
    /// Sparse-matrix construction failed.
    Tensor(TensorError),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::NotEnoughRelations { found } => {
                write!(f, "multiplex networks need at least 2 relations, got {found}")
            }
            GraphError::BadAdjacencyShape {
                relation,
                rows,
                cols,
                nodes,
            } => write!(
                f,
                "adjacency of relation '{relation}' is {rows}x{cols}, expected {nodes}x{nodes}"
            ),
            GraphError::NegativeWeight { relation } => {
                write!(f, "relation '{relation}' has a negative edge weight")
            }
            GraphError::BadMatrixRows { what, rows, nodes } => {
                write!(f, "{what} has {rows} rows for {nodes} nodes")
            }
            GraphError::LabelBitInvalid { node } => {
                write!(f, "node {node} has a label entry that is not 0 or 1")
            }
            GraphError::LabelRowEmpty { node } => {
                write!(f, "labeled node {node} has no label bit set")
            }
            GraphError::MultipleBitsSingleLabel { node } => write!(
                f,
                "node {node} has several label bits in a single-label graph"
            ),
            GraphError::NodeOutOfRange { node, nodes } => {
                write!(f, "node id {node} out of range for {nodes} nodes")
            }
            GraphError::NotEnoughLabeled { labeled } => write!(
                f,
                "need at least 3 labeled nodes to split, got {labeled}"
            ),
            GraphError::EmptySplitPart { part } => {
                write!(f, "split produced an empty {part} set")
            }
            GraphError::BadEpsilon { value } => {
                write!(f, "self-loop weight must be positive, got {value}")
            }
            GraphError::AsymmetricKernel => write!(f, "kernel matrix is not symmetric"),
            GraphError::TrainNotLabeled { node } => {
                write!(f, "train node {node} is not in the labeled set")
            }
            GraphError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for GraphError {}

impl From<TensorError> for GraphError {
    fn from(e: TensorError) -> Self {
        GraphError::Tensor(e)
    }
}

/// A multi-layer graph over one shared node set.
///
/// Immutable after construction; shared read-only access is safe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplexGraph {
    num_nodes: usize,
    relations: Vec<String>,
    intra: Vec<SparseMatrix>,
    cross: BTreeMap<(usize, usize), SparseMatrix>,
    features: DenseMatrix,
    labels: DenseMatrix,
    labeled_nodes: BTreeSet<usize>,
    multi_label: bool,
}

impl MultiplexGraph {
    /// Validate and assemble a multiplex network.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_nodes: usize,
        relations: Vec<String>,
        intra: Vec<SparseMatrix>,
        cross: BTreeMap<(usize, usize), SparseMatrix>,
        features: DenseMatrix,
        labels: DenseMatrix,
        labeled_nodes: BTreeSet<usize>,
        multi_label: bool,
    ) -> Result<Self, GraphError> {
        if relations.len() < 2 {
            return Err(GraphError::NotEnoughRelations {
                found: relations.len(),
            });
        }
        assert_eq!(
            relations.len(),
            intra.len(),
            "one intra-layer adjacency per relation"
        );
        for (name, a) in relations.iter().zip(intra.iter()) {
            Self::check_adjacency(name, a, num_nodes)?;
        }
        for (&(r, s), a) in &cross {
            assert!(r != s, "cross adjacency must join two distinct relations");
            assert!(
                r < relations.len() && s < relations.len(),
                "cross adjacency names an unknown relation"
            );
            Self::check_adjacency(&relations[r], a, num_nodes)?;
        }
        if features.rows() != num_nodes {
            return Err(GraphError::BadMatrixRows {
                what: "feature matrix",
                rows: features.rows(),
                nodes: num_nodes,
            });
        }
        if labels.rows() != num_nodes {
            return Err(GraphError::BadMatrixRows {
                what: "label matrix",
                rows: labels.rows(),
                nodes: num_nodes,
            });
        }
        for i in 0..num_nodes {
            if labels.row(i).iter().any(|&b| b != 0.0 && b != 1.0) {
                return Err(GraphError::LabelBitInvalid { node: i });
            }
        }
        for &i in &labeled_nodes {
            if i >= num_nodes {
                return Err(GraphError::NodeOutOfRange {
                    node: i,
                    nodes: num_nodes,
                });
            }
            let bits = labels.row(i).iter().filter(|&&b| b == 1.0).count();
            if bits == 0 {
                return Err(GraphError::LabelRowEmpty { node: i });
            }
            if !multi_label && bits > 1 {
                return Err(GraphError::MultipleBitsSingleLabel { node: i });
            }
        }
        Ok(MultiplexGraph {
            num_nodes,
            relations,
            intra,
            cross,
            features,
            labels,
            labeled_nodes,
            multi_label,
        })
    }

    fn check_adjacency(name: &str, a: &SparseMatrix, nodes: usize) -> Result<(), GraphError> {
        if a.shape() != (nodes, nodes) {
            return Err(GraphError::BadAdjacencyShape {
                relation: String::from(name),
                rows: a.rows(),
                cols: a.cols(),
                nodes,
            });
        }
        if a.iter().any(|(_, _, w)| w < 0.0) {
            return Err(GraphError::NegativeWeight {
                relation: String::from(name),
            });
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.cols()
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn intra(&self, r: usize) -> &SparseMatrix {
        &self.intra[r]
    }

    /// Cross-layer adjacency from relation `r` to relation `s`, if present.
    pub fn cross(&self, r: usize, s: usize) -> Option<&SparseMatrix> {
        self.cross.get(&(r, s))
    }

    pub fn cross_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cross.keys().copied()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &DenseMatrix {
        &self.labels
    }

    pub fn labeled_nodes(&self) -> &BTreeSet<usize> {
        &self.labeled_nodes
    }

    pub fn is_labeled(&self, node: usize) -> bool {
        self.labeled_nodes.contains(&node)
    }

    pub fn multi_label(&self) -> bool {
        self.multi_label
    }
}

/// Disjoint train/val/test node sets drawn from one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Sample a split: one third of the labeled nodes train, half of that many
/// validate, and half of all nodes test, preferring labeled test nodes so
/// test metrics stay computable.
pub fn make_split(g: &MultiplexGraph, seed: u64) -> Result<Split, GraphError> {
    let labeled: Vec<usize> = g.labeled_nodes().iter().copied().collect();
    if labeled.len() < 3 {
        return Err(GraphError::NotEnoughLabeled {
            labeled: labeled.len(),
        });
    }
    let mut rng = rng::stream(seed, Domain::Split, 0);

    let mut pool = labeled;
    pool.shuffle(&mut rng);
    let train_size = pool.len() / 3;
    let val_size = train_size / 2;
    let mut train: Vec<usize> = pool.drain(..train_size).collect();
    let mut val: Vec<usize> = pool.drain(..val_size.min(pool.len())).collect();

    // Remaining labeled nodes go to the front of the test candidate list.
    let taken: BTreeSet<usize> = train.iter().chain(val.iter()).copied().collect();
    let mut unlabeled: Vec<usize> = (0..g.num_nodes())
        .filter(|i| !g.is_labeled(*i) && !taken.contains(i))
        .collect();
    unlabeled.shuffle(&mut rng);
    let test_size = g.num_nodes() / 2;
    let mut test: Vec<usize> = pool.into_iter().chain(unlabeled).take(test_size).collect();

    for (part, list) in [("train", &train), ("val", &val), ("test", &test)] {
        if list.is_empty() {
            return Err(GraphError::EmptySplitPart { part });
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        val,
        test,
        seed,
    })
}

/// Degree-normalized adjacency with self-loops:
/// `D̃^{-1/2} (A + εI) D̃^{-1/2}` where `D̃` is the degree of `A + εI`.
pub fn propagation_kernel(a: &SparseMatrix, epsilon: Real) -> Result<SparseMatrix, GraphError> {
    if !(epsilon > 0.0) {
        return Err(GraphError::BadEpsilon { value: epsilon });
    }
    assert_eq!(a.rows(), a.cols(), "propagation kernel needs a square matrix");
    let n = a.rows();

    // A + εI with merged diagonal, then degree normalization.
    let mut triplets: Vec<(usize, usize, Real)> = Vec::with_capacity(a.nnz() + n);
    let mut diag = alloc::vec![epsilon; n];
    for (i, j, w) in a.iter() {
        assert!(w >= 0.0, "propagation kernel needs nonnegative weights");
        if i == j {
            diag[i] += w;
        } else {
            triplets.push((i, j, w));
        }
    }
    let mut degree = diag.clone();
    for &(i, _, w) in &triplets {
        degree[i] += w;
    }
    // w / sqrt(d_i d_j) rather than w * d_i^{-1/2} * d_j^{-1/2}: same value to
    // rounding, but isolated nodes come out exactly 1.
    for t in &mut triplets {
        t.2 /= math::sqrt(degree[t.0] * degree[t.1]);
    }
    for (i, &d) in diag.iter().enumerate() {
        triplets.push((i, i, d / degree[i]));
    }
    Ok(SparseMatrix::from_triplets(n, n, &triplets)?)
}

/// Train-masked label-similarity kernel: `S_ij = Y_i · Y_j` for distinct
/// train nodes `i, j`, zero elsewhere (diagonal included).
pub fn label_similarity_kernel(g: &MultiplexGraph, train: &[usize]) -> Result<SparseMatrix, GraphError> {
    for &i in train {
        if !g.is_labeled(i) {
            return Err(GraphError::TrainNotLabeled { node: i });
        }
    }
    let y = g.labels();
    let mut triplets = Vec::new();
    for (a, &i) in train.iter().enumerate() {
        for &j in train.iter().skip(a + 1) {
            let dot: Real = y
                .row(i)
                .iter()
                .zip(y.row(j).iter())
                .map(|(&p, &q)| p * q)
                .sum();
            if dot != 0.0 {
                triplets.push((i, j, dot));
                triplets.push((j, i, dot));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(g.num_nodes(), g.num_nodes(), &triplets)?)
}

/// Unnormalized graph Laplacian `Δ(S) = diag(S·1) − S` of a symmetric kernel.
pub fn laplacian(s: &SparseMatrix) -> Result<SparseMatrix, GraphError> {
    if !s.is_symmetric() {
        return Err(GraphError::AsymmetricKernel);
    }
    let n = s.rows();
    let sums = s.row_sums();
    let mut triplets: Vec<(usize, usize, Real)> = Vec::with_capacity(s.nnz() + n);
    let mut diag_seen = alloc::vec![0.0; n];
    for (i, j, w) in s.iter() {
        if i == j {
            diag_seen[i] = w;
        } else if w != 0.0 {
            triplets.push((i, j, -w));
        }
    }
    for i in 0..n {
        let d = sums[i] - diag_seen[i];
        if d != 0.0 {
            triplets.push((i, i, d));
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, &triplets)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn two_relation_graph(n: usize, labeled: &[usize]) -> MultiplexGraph {
        let ring: Vec<(usize, usize, Real)> = (0..n)
            .flat_map(|i| {
                let j = (i + 1) % n;
                [(i, j, 1.0), (j, i, 1.0)]
            })
            .collect();
        let a0 = SparseMatrix::from_triplets(n, n, &ring).unwrap();
        let a1 = SparseMatrix::identity(n);
        let features = DenseMatrix::from_fn(n, 3, |i, j| (i * 3 + j) as Real / 10.0);
        let labels = DenseMatrix::from_fn(n, 2, |i, j| if i % 2 == j { 1.0 } else { 0.0 });
        MultiplexGraph::new(
            n,
            vec!["ring".to_string(), "self".to_string()],
            vec![a0, a1],
            BTreeMap::new(),
            features,
            labels,
            labeled.iter().copied().collect(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn rejects_single_relation() {
        let a = SparseMatrix::identity(2);
        let err = MultiplexGraph::new(
            2,
            vec!["only".to_string()],
            vec![a],
            BTreeMap::new(),
            DenseMatrix::zeros(2, 1),
            DenseMatrix::zeros(2, 1),
            BTreeSet::new(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::NotEnoughRelations { found: 1 }));
    }

    #[test]
    fn rejects_labeled_node_without_bits() {
        let a = SparseMatrix::identity(2);
        let err = MultiplexGraph::new(
            2,
            vec!["a".to_string(), "b".to_string()],
            vec![a.clone(), a],
            BTreeMap::new(),
            DenseMatrix::zeros(2, 1),
            DenseMatrix::zeros(2, 2),
            [0].into_iter().collect(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::LabelRowEmpty { node: 0 }));
    }

    #[test]
    fn split_sizes_follow_the_thirds_rule() {
        // 100 nodes, 60 labeled: train 20, val 10, test 50.
        let labeled: Vec<usize> = (0..60).collect();
        let g = two_relation_graph(100, &labeled);
        let split = make_split(&g, 7).unwrap();
        assert_eq!(split.train.len(), 20);
        assert_eq!(split.val.len(), 10);
        assert_eq!(split.test.len(), 50);
        // Disjoint and train/val labeled.
        let train: BTreeSet<_> = split.train.iter().collect();
        let val: BTreeSet<_> = split.val.iter().collect();
        let test: BTreeSet<_> = split.test.iter().collect();
        assert!(train.is_disjoint(&val));
        assert!(train.is_disjoint(&test));
        assert!(val.is_disjoint(&test));
        assert!(split.train.iter().all(|&i| g.is_labeled(i)));
        assert!(split.val.iter().all(|&i| g.is_labeled(i)));
        // All 30 remaining labeled nodes land in test ahead of unlabeled ones.
        assert_eq!(split.test.iter().filter(|&&i| g.is_labeled(i)).count(), 30);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let labeled: Vec<usize> = (0..60).collect();
        let g = two_relation_graph(100, &labeled);
        let a = make_split(&g, 3).unwrap();
        let b = make_split(&g, 3).unwrap();
        assert_eq!(a, b);
        let differing = (0..5)
            .filter(|&s| make_split(&g, s).unwrap().train != a.train)
            .count();
        assert!(differing >= 4, "only {differing} of 5 seeds differed");
    }

    #[test]
    fn split_needs_three_labeled_nodes() {
        let g = two_relation_graph(10, &[0, 1]);
        assert!(matches!(
            make_split(&g, 0),
            Err(GraphError::NotEnoughLabeled { labeled: 2 })
        ));
    }

    #[test]
    fn kernel_two_node_hand_value() {
        // One unit edge, ε=3: degrees 4, off-diagonal 1/4, diagonal 3/4.
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let k = propagation_kernel(&a, 3.0).unwrap().to_dense();
        assert_relative_eq!(k[(0, 0)], 0.75, epsilon = 1e-15);
        assert_relative_eq!(k[(0, 1)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(k[(1, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(k[(1, 1)], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn kernel_of_empty_graph_is_identity() {
        let a = SparseMatrix::from_triplets(4, 4, &[]).unwrap();
        let k = propagation_kernel(&a, 3.0).unwrap();
        assert_eq!(k.to_dense().data(), SparseMatrix::identity(4).to_dense().data());
    }

    #[test]
    fn kernel_rejects_nonpositive_epsilon() {
        let a = SparseMatrix::identity(2);
        assert!(matches!(
            propagation_kernel(&a, 0.0),
            Err(GraphError::BadEpsilon { .. })
        ));
    }

    #[test]
    fn label_kernel_masks_and_zeroes_diagonal() {
        let labeled: Vec<usize> = (0..6).collect();
        let g = two_relation_graph(6, &labeled);
        // Nodes 0 and 2 share class 0; node 1 has class 1.
        let s = label_similarity_kernel(&g, &[0, 1, 2]).unwrap();
        assert_eq!(s.get(0, 2), 1.0);
        assert_eq!(s.get(2, 0), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(0, 0), 0.0);
        // Node 4 shares class 0 but is not in train, so it is masked out.
        assert_eq!(s.get(0, 4), 0.0);
    }

    #[test]
    fn multi_label_kernel_counts_shared_bits() {
        let labels = DenseMatrix::from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0], &[1.0, 1.0, 1.0]]);
        let a = SparseMatrix::identity(3);
        let g = MultiplexGraph::new(
            3,
            vec!["a".to_string(), "b".to_string()],
            vec![a.clone(), a],
            BTreeMap::new(),
            DenseMatrix::zeros(3, 1),
            labels,
            [0, 1, 2].into_iter().collect(),
            true,
        )
        .unwrap();
        let s = label_similarity_kernel(&g, &[0, 1, 2]).unwrap();
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(1, 2), 2.0);
    }

    #[test]
    fn laplacian_hand_value_and_zero_rows() {
        let s = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let l = laplacian(&s).unwrap().to_dense();
        assert_eq!(l.data(), &[1.0, -1.0, -1.0, 1.0]);

        let z = SparseMatrix::from_triplets(3, 3, &[]).unwrap();
        assert_eq!(laplacian(&z).unwrap().nnz(), 0);
    }

    #[test]
    fn laplacian_rejects_asymmetric_input() {
        let s = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(laplacian(&s), Err(GraphError::AsymmetricKernel)));
    }
}
