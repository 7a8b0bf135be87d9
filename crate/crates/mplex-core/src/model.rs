//! Forward computation: per-relation graph-convolutional encoders, feature
//! corruption, cluster assignments and summaries, the bilinear discriminator,
//! attention aggregation across relations, and the label head.
//!
//! Every step is recorded on a [`Tape`] so the objective can backpropagate
//! through the whole pipeline; evaluation builds a throwaway tape and reads
//! values only.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::Real;
use crate::rng::{self, Domain};
use crate::tensor::{DenseMatrix, DiffValue, SparseMatrix, Tape, TensorError};

/// Errors raised while validating model inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A matrix has the wrong shape for its role.
    Dimension {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A corruption permutation does not visit every node exactly once.
    NotAPermutation { len: usize, nodes: usize },
    /// A tensor operation failed.
    Tensor(TensorError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Dimension {
                what,
                expected,
                found,
            } => write!(
                f,
                "{what}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            ModelError::NotAPermutation { len, nodes } => write!(
                f,
                "corruption needs a permutation of {nodes} node ids, got {len} entries"
            ),
            ModelError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> Self {
        ModelError::Tensor(e)
    }
}

/// Global summary used by the contrastive objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// Cluster-weighted per-node summaries (the full model).
    Cluster,
    /// One shared sigmoid-of-mean summary per relation (ablation baseline).
    MeanPool,
}

/// Problem and architecture sizes every parameter shape derives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Node count shared by all layers.
    pub nodes: usize,
    /// Input feature width.
    pub features: usize,
    /// Embedding width `d`.
    pub embed: usize,
    /// Encoder depth (number of graph-convolution layers).
    pub layers: usize,
    /// Clusters per relation.
    pub clusters: usize,
    /// Label count.
    pub labels: usize,
    /// Relation count.
    pub relations: usize,
}

/// Every learnable matrix of the model.
///
/// The canonical tensor order — used by [`ModelParams::tensors`], the
/// optimizer, and checkpoints — is: per relation, alternating encoder weight
/// and rectifier slope per layer, then cluster embeddings, then the layer
/// embedding; finally the shared bilinear matrix, the consensus embedding,
/// and the label head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: Dims,
    /// Encoder weights per relation and layer; first `F x d`, then `d x d`.
    pub gcn_weights: Vec<Vec<DenseMatrix>>,
    /// One learnable 1x1 negative-side slope per relation and layer.
    pub prelu_slopes: Vec<Vec<DenseMatrix>>,
    /// `K x d` cluster embeddings per relation.
    pub cluster_embeddings: Vec<DenseMatrix>,
    /// `1 x d` attention embedding per relation.
    pub layer_embeddings: Vec<DenseMatrix>,
    /// Shared `d x d` discriminator matrix.
    pub bilinear: DenseMatrix,
    /// `|V| x d` consensus embedding.
    pub consensus: DenseMatrix,
    /// `d x |Q|` label head.
    pub label_head: DenseMatrix,
}

impl ModelParams {
    /// Seeded initialization: weights uniform in `[-1/sqrt(fan_in),
    /// 1/sqrt(fan_in)]`, rectifier slopes 0.25, consensus zeros.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Domain::Init, 0);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / crate::math::sqrt(fan_in as Real);
            DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
        };

        let mut gcn_weights = Vec::with_capacity(dims.relations);
        let mut prelu_slopes = Vec::with_capacity(dims.relations);
        let mut cluster_embeddings = Vec::with_capacity(dims.relations);
        let mut layer_embeddings = Vec::with_capacity(dims.relations);
        for _ in 0..dims.relations {
            let mut ws = Vec::with_capacity(dims.layers);
            let mut ss = Vec::with_capacity(dims.layers);
            for m in 0..dims.layers {
                let fan_in = if m == 0 { dims.features } else { dims.embed };
                ws.push(uniform(fan_in, dims.embed, fan_in));
                ss.push(DenseMatrix::from_elem(1, 1, 0.25));
            }
            gcn_weights.push(ws);
            prelu_slopes.push(ss);
            cluster_embeddings.push(uniform(dims.clusters, dims.embed, dims.embed));
            layer_embeddings.push(uniform(1, dims.embed, dims.embed));
        }
        let bilinear = uniform(dims.embed, dims.embed, dims.embed);
        let label_head = uniform(dims.embed, dims.labels, dims.embed);
        ModelParams {
            dims,
            gcn_weights,
            prelu_slopes,
            cluster_embeddings,
            layer_embeddings,
            bilinear,
            consensus: DenseMatrix::zeros(dims.nodes, dims.embed),
            label_head,
        }
    }

    /// All tensors in canonical order.
    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut out = Vec::new();
        for r in 0..self.dims.relations {
            for m in 0..self.dims.layers {
                out.push(&self.gcn_weights[r][m]);
                out.push(&self.prelu_slopes[r][m]);
            }
            out.push(&self.cluster_embeddings[r]);
            out.push(&self.layer_embeddings[r]);
        }
        out.push(&self.bilinear);
        out.push(&self.consensus);
        out.push(&self.label_head);
        out
    }

    /// Mutable view of all tensors in canonical order.
    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = Vec::new();
        for (((ws, ss), c), l) in self
            .gcn_weights
            .iter_mut()
            .zip(self.prelu_slopes.iter_mut())
            .zip(self.cluster_embeddings.iter_mut())
            .zip(self.layer_embeddings.iter_mut())
        {
            for (w, s) in ws.iter_mut().zip(ss.iter_mut()) {
                out.push(w);
                out.push(s);
            }
            out.push(c);
            out.push(l);
        }
        out.push(&mut self.bilinear);
        out.push(&mut self.consensus);
        out.push(&mut self.label_head);
        out
    }

    /// Diagnostic names aligned with [`ModelParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in 0..self.dims.relations {
            for m in 0..self.dims.layers {
                out.push(format!("gcn_weight[{r}][{m}]"));
                out.push(format!("prelu_slope[{r}][{m}]"));
            }
            out.push(format!("cluster_embeddings[{r}]"));
            out.push(format!("layer_embedding[{r}]"));
        }
        out.push(String::from("bilinear"));
        out.push(String::from("consensus"));
        out.push(String::from("label_head"));
        out
    }

    /// Record every tensor as a differentiable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let handles = self
            .tensors()
            .into_iter()
            .map(|t| tape.leaf(t.clone()))
            .collect();
        BoundParams {
            dims: self.dims,
            handles,
        }
    }

    /// Verify every tensor has the shape its role demands and is finite.
    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let d = self.dims;
        let expect = |what, expected: (usize, usize), m: &DenseMatrix| {
            if m.shape() != expected {
                return Err(ModelError::Dimension {
                    what,
                    expected,
                    found: m.shape(),
                });
            }
            if !m.is_finite() {
                return Err(ModelError::Tensor(TensorError::NonFinite {
                    op: "check_shapes",
                }));
            }
            Ok(())
        };
        if self.gcn_weights.len() != d.relations || self.prelu_slopes.len() != d.relations {
            return Err(ModelError::Dimension {
                what: "per-relation parameter lists",
                expected: (d.relations, 0),
                found: (self.gcn_weights.len(), self.prelu_slopes.len()),
            });
        }
        for r in 0..d.relations {
            if self.gcn_weights[r].len() != d.layers {
                return Err(ModelError::Dimension {
                    what: "encoder layer list",
                    expected: (d.layers, 0),
                    found: (self.gcn_weights[r].len(), 0),
                });
            }
            for m in 0..d.layers {
                let fan_in = if m == 0 { d.features } else { d.embed };
                expect("encoder weight", (fan_in, d.embed), &self.gcn_weights[r][m])?;
                expect("rectifier slope", (1, 1), &self.prelu_slopes[r][m])?;
            }
            expect(
                "cluster embeddings",
                (d.clusters, d.embed),
                &self.cluster_embeddings[r],
            )?;
            expect("layer embedding", (1, d.embed), &self.layer_embeddings[r])?;
        }
        expect("bilinear matrix", (d.embed, d.embed), &self.bilinear)?;
        expect("consensus embedding", (d.nodes, d.embed), &self.consensus)?;
        expect("label head", (d.embed, d.labels), &self.label_head)?;
        Ok(())
    }
}

/// Tape handles for every parameter, in canonical order.
pub struct BoundParams {
    dims: Dims,
    handles: Vec<DiffValue>,
}

impl BoundParams {
    fn relation_block(&self, r: usize) -> usize {
        r * (2 * self.dims.layers + 2)
    }

    pub fn gcn_weight(&self, r: usize, m: usize) -> DiffValue {
        self.handles[self.relation_block(r) + 2 * m]
    }

    pub fn prelu_slope(&self, r: usize, m: usize) -> DiffValue {
        self.handles[self.relation_block(r) + 2 * m + 1]
    }

    pub fn cluster_embeddings(&self, r: usize) -> DiffValue {
        self.handles[self.relation_block(r) + 2 * self.dims.layers]
    }

    pub fn layer_embedding(&self, r: usize) -> DiffValue {
        self.handles[self.relation_block(r) + 2 * self.dims.layers + 1]
    }

    pub fn bilinear(&self) -> DiffValue {
        self.handles[self.relation_block(self.dims.relations)]
    }

    pub fn consensus(&self) -> DiffValue {
        self.handles[self.relation_block(self.dims.relations) + 1]
    }

    pub fn label_head(&self) -> DiffValue {
        self.handles[self.relation_block(self.dims.relations) + 2]
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// All handles in canonical order, aligned with [`ModelParams::tensors`].
    pub fn handles(&self) -> &[DiffValue] {
        &self.handles
    }
}

/// Constant inputs of one forward pass.
pub struct ForwardInputs<'a> {
    /// Normalized propagation kernel per relation.
    pub kernels: &'a [Rc<SparseMatrix>],
    /// Node features `X`.
    pub features: &'a DenseMatrix,
    /// One corruption permutation per relation.
    pub perms: &'a [Vec<usize>],
    pub summary: SummaryMode,
    pub multi_label: bool,
}

/// Tape handles produced by one forward pass.
pub struct Forward {
    /// True local embeddings `U_r`, one per relation.
    pub local: Vec<DiffValue>,
    /// Corrupted embeddings, encoded from row-shuffled features.
    pub corrupted: Vec<DiffValue>,
    /// Row-stochastic cluster assignments `H_r`.
    pub assignments: Vec<DiffValue>,
    /// Per-node summaries `S_r`.
    pub summaries: Vec<DiffValue>,
    /// Row-stochastic attention over relations, `|V| x |R|`.
    pub attention: DiffValue,
    /// Attention-weighted combination of the true embeddings.
    pub aggregated: DiffValue,
    /// The same combination of the corrupted embeddings (same weights).
    pub aggregated_corrupted: DiffValue,
    /// Label probabilities.
    pub predictions: DiffValue,
}

/// Stack of graph convolutions: `X^m = PReLU(K X^{m-1} W^m)`.
pub fn encode_relation(
    tape: &mut Tape,
    kernel: &Rc<SparseMatrix>,
    features: DiffValue,
    weights: &[DiffValue],
    slopes: &[DiffValue],
) -> Result<DiffValue, ModelError> {
    assert_eq!(weights.len(), slopes.len(), "one slope per encoder layer");
    let mut x = features;
    for (&w, &s) in weights.iter().zip(slopes.iter()) {
        let propagated = tape.spmm(kernel.clone(), x)?;
        let projected = tape.matmul(propagated, w)?;
        x = tape.prelu(projected, s)?;
    }
    Ok(x)
}

/// Check that `perm` visits every node id below `nodes` exactly once.
pub fn validate_permutation(perm: &[usize], nodes: usize) -> Result<(), ModelError> {
    if perm.len() != nodes {
        return Err(ModelError::NotAPermutation {
            len: perm.len(),
            nodes,
        });
    }
    let mut seen = alloc::vec![false; nodes];
    for &p in perm {
        if p >= nodes || seen[p] {
            return Err(ModelError::NotAPermutation {
                len: perm.len(),
                nodes,
            });
        }
        seen[p] = true;
    }
    Ok(())
}

/// Softmax cluster assignments `H = softmax(U C^T)` over the cluster axis.
pub fn assign_clusters(
    tape: &mut Tape,
    local: DiffValue,
    clusters: DiffValue,
) -> Result<DiffValue, ModelError> {
    let ct = tape.transpose(clusters);
    let logits = tape.matmul(local, ct)?;
    Ok(tape.softmax_rows(logits))
}

/// Cluster-weighted summaries `S = H C`.
pub fn contextual_summary(
    tape: &mut Tape,
    assignments: DiffValue,
    clusters: DiffValue,
) -> Result<DiffValue, ModelError> {
    Ok(tape.matmul(assignments, clusters)?)
}

/// Shared summary: sigmoid of the column mean, broadcast to every node.
pub fn mean_pool_summary(tape: &mut Tape, local: DiffValue) -> Result<DiffValue, ModelError> {
    let nodes = tape.value(local).rows();
    let mean = tape.column_mean(local);
    let squashed = tape.sigmoid(mean);
    Ok(tape.broadcast_rows(squashed, nodes)?)
}

/// Bilinear pairing probability `sigma(u^T B s)` for one embedding/summary pair.
pub fn discriminate(u: &[Real], s: &[Real], bilinear: &DenseMatrix) -> Real {
    assert_eq!(u.len(), bilinear.rows(), "embedding width mismatch");
    assert_eq!(s.len(), bilinear.cols(), "summary width mismatch");
    let mut logit = 0.0;
    for (j, &sj) in s.iter().enumerate() {
        let mut t = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            t += ui * bilinear[(i, j)];
        }
        logit += t * sj;
    }
    crate::math::sigmoid(logit)
}

/// Softmax attention over relations from per-layer embeddings, then the
/// weighted combination of `locals`.
pub fn attention_aggregate(
    tape: &mut Tape,
    locals: &[DiffValue],
    layer_embeds: &[DiffValue],
) -> Result<(DiffValue, DiffValue), ModelError> {
    assert_eq!(
        locals.len(),
        layer_embeds.len(),
        "one layer embedding per relation"
    );
    let mut scores = Vec::with_capacity(locals.len());
    for (&u, &l) in locals.iter().zip(layer_embeds.iter()) {
        let lt = tape.transpose(l);
        scores.push(tape.matmul(u, lt)?);
    }
    let logits = tape.concat_cols(&scores)?;
    let attention = tape.softmax_rows(logits);
    let aggregated = aggregate_with(tape, attention, locals)?;
    Ok((attention, aggregated))
}

/// Combine per-relation embeddings with existing attention weights.
pub fn aggregate_with(
    tape: &mut Tape,
    attention: DiffValue,
    embeds: &[DiffValue],
) -> Result<DiffValue, ModelError> {
    let mut total: Option<DiffValue> = None;
    for (r, &u) in embeds.iter().enumerate() {
        let weight = tape.col_slice(attention, r)?;
        let weighted = tape.mul_col(u, weight)?;
        total = Some(match total {
            None => weighted,
            Some(t) => tape.add(t, weighted)?,
        });
    }
    Ok(total.expect("at least one relation"))
}

/// Label probabilities: row softmax (single-label) or sigmoid (multi-label).
pub fn predict(
    tape: &mut Tape,
    consensus: DiffValue,
    label_head: DiffValue,
    multi_label: bool,
) -> Result<DiffValue, ModelError> {
    let logits = tape.matmul(consensus, label_head)?;
    Ok(if multi_label {
        tape.sigmoid(logits)
    } else {
        tape.softmax_rows(logits)
    })
}

/// Run the whole forward pass, recording everything on `tape`.
pub fn forward(
    tape: &mut Tape,
    bound: &BoundParams,
    inputs: &ForwardInputs<'_>,
) -> Result<Forward, ModelError> {
    let d = bound.dims();
    if inputs.features.shape() != (d.nodes, d.features) {
        return Err(ModelError::Dimension {
            what: "feature matrix",
            expected: (d.nodes, d.features),
            found: inputs.features.shape(),
        });
    }
    assert_eq!(inputs.kernels.len(), d.relations, "one kernel per relation");
    assert_eq!(inputs.perms.len(), d.relations, "one permutation per relation");
    for k in inputs.kernels {
        if k.shape() != (d.nodes, d.nodes) {
            return Err(ModelError::Dimension {
                what: "propagation kernel",
                expected: (d.nodes, d.nodes),
                found: k.shape(),
            });
        }
    }
    for perm in inputs.perms {
        validate_permutation(perm, d.nodes)?;
    }

    let features = tape.constant(inputs.features.clone());
    let mut local = Vec::with_capacity(d.relations);
    let mut corrupted = Vec::with_capacity(d.relations);
    let mut assignments = Vec::with_capacity(d.relations);
    let mut summaries = Vec::with_capacity(d.relations);
    for r in 0..d.relations {
        let weights: Vec<DiffValue> = (0..d.layers).map(|m| bound.gcn_weight(r, m)).collect();
        let slopes: Vec<DiffValue> = (0..d.layers).map(|m| bound.prelu_slope(r, m)).collect();

        let u = encode_relation(tape, &inputs.kernels[r], features, &weights, &slopes)?;
        let shuffled = tape.row_gather(features, &inputs.perms[r])?;
        let u_corrupt = encode_relation(tape, &inputs.kernels[r], shuffled, &weights, &slopes)?;

        let h = assign_clusters(tape, u, bound.cluster_embeddings(r))?;
        let s = match inputs.summary {
            SummaryMode::Cluster => contextual_summary(tape, h, bound.cluster_embeddings(r))?,
            SummaryMode::MeanPool => mean_pool_summary(tape, u)?,
        };
        local.push(u);
        corrupted.push(u_corrupt);
        assignments.push(h);
        summaries.push(s);
    }

    let layer_embeds: Vec<DiffValue> = (0..d.relations).map(|r| bound.layer_embedding(r)).collect();
    let (attention, aggregated) = attention_aggregate(tape, &local, &layer_embeds)?;
    let aggregated_corrupted = aggregate_with(tape, attention, &corrupted)?;
    let predictions = predict(tape, bound.consensus(), bound.label_head(), inputs.multi_label)?;

    Ok(Forward {
        local,
        corrupted,
        assignments,
        summaries,
        attention,
        aggregated,
        aggregated_corrupted,
        predictions,
    })
}

/// Per-relation embeddings straight from the parameters, without a tape.
///
/// Applies the same arithmetic as the recorded encoder, so values agree
/// exactly with a taped forward pass over the same inputs.
pub fn embed_relations(
    params: &ModelParams,
    kernels: &[SparseMatrix],
    features: &DenseMatrix,
) -> Result<Vec<DenseMatrix>, ModelError> {
    let d = params.dims;
    if features.shape() != (d.nodes, d.features) {
        return Err(ModelError::Dimension {
            what: "feature matrix",
            expected: (d.nodes, d.features),
            found: features.shape(),
        });
    }
    assert_eq!(kernels.len(), d.relations, "one kernel per relation");
    let mut locals = Vec::with_capacity(d.relations);
    for r in 0..d.relations {
        if kernels[r].shape() != (d.nodes, d.nodes) {
            return Err(ModelError::Dimension {
                what: "propagation kernel",
                expected: (d.nodes, d.nodes),
                found: kernels[r].shape(),
            });
        }
        let mut x = features.clone();
        for m in 0..d.layers {
            let propagated = kernels[r].mul_dense(&x)?;
            let projected = propagated.matmul(&params.gcn_weights[r][m])?;
            let k = params.prelu_slopes[r][m][(0, 0)];
            x = projected.map(|v| if v < 0.0 { k * v } else { v });
        }
        locals.push(x);
    }
    Ok(locals)
}

/// Softmax cluster assignments for each relation embedding, without a tape.
pub fn soft_assignments(
    params: &ModelParams,
    locals: &[DenseMatrix],
) -> Result<Vec<DenseMatrix>, ModelError> {
    let d = params.dims;
    assert_eq!(locals.len(), d.relations, "one embedding per relation");
    let mut assignments = Vec::with_capacity(d.relations);
    for r in 0..d.relations {
        if locals[r].shape() != (d.nodes, d.embed) {
            return Err(ModelError::Dimension {
                what: "relation embedding",
                expected: (d.nodes, d.embed),
                found: locals[r].shape(),
            });
        }
        let ct = params.cluster_embeddings[r].transpose();
        let mut h = locals[r].matmul(&ct)?;
        h.softmax_rows_inplace();
        assignments.push(h);
    }
    Ok(assignments)
}

/// Label probabilities straight from the parameters, without a tape.
pub fn predict_probs(params: &ModelParams, multi_label: bool) -> DenseMatrix {
    let mut probs = params
        .consensus
        .matmul(&params.label_head)
        .expect("consensus and label head widths agree");
    if multi_label {
        probs = probs.map(crate::math::sigmoid);
    } else {
        probs.softmax_rows_inplace();
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn test_dims() -> Dims {
        Dims {
            nodes: 8,
            features: 5,
            embed: 4,
            layers: 2,
            clusters: 3,
            labels: 3,
            relations: 2,
        }
    }

    fn ring_kernel(n: usize) -> Rc<SparseMatrix> {
        let triplets: Vec<(usize, usize, Real)> = (0..n)
            .flat_map(|i| {
                let j = (i + 1) % n;
                [(i, j, 1.0), (j, i, 1.0)]
            })
            .collect();
        let a = SparseMatrix::from_triplets(n, n, &triplets).unwrap();
        Rc::new(graph::propagation_kernel(&a, 3.0).unwrap())
    }

    fn identity_perm(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn init_is_seeded_and_shapes_check() {
        let dims = test_dims();
        let a = ModelParams::init(dims, 11);
        let b = ModelParams::init(dims, 11);
        let c = ModelParams::init(dims, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.check_shapes().unwrap();
        assert!(a.consensus.data().iter().all(|&z| z == 0.0));
        assert_eq!(a.tensors().len(), dims.relations * (2 * dims.layers + 2) + 3);
        assert_eq!(a.tensor_names().len(), a.tensors().len());
    }

    #[test]
    fn bound_handles_align_with_tensor_order() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 5);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let tensors = params.tensors();
        let probes = [
            (bound.gcn_weight(1, 0), 6),
            (bound.prelu_slope(0, 1), 3),
            (bound.cluster_embeddings(1), 10),
            (bound.layer_embedding(0), 5),
            (bound.bilinear(), 12),
            (bound.consensus(), 13),
            (bound.label_head(), 14),
        ];
        for (handle, index) in probes {
            assert_eq!(tape.value(handle).data(), tensors[index].data());
        }
    }

    #[test]
    fn encoder_of_zero_features_is_zero() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 3);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(DenseMatrix::zeros(dims.nodes, dims.features));
        let weights: Vec<_> = (0..dims.layers).map(|m| bound.gcn_weight(0, m)).collect();
        let slopes: Vec<_> = (0..dims.layers).map(|m| bound.prelu_slope(0, m)).collect();
        let u = encode_relation(&mut tape, &ring_kernel(dims.nodes), x, &weights, &slopes).unwrap();
        assert!(tape.value(u).data().iter().all(|&v| v == 0.0));
    }

    /// Straight-line scalar reimplementation of the encoder stack.
    fn encoder_oracle(
        kernel: &SparseMatrix,
        features: &DenseMatrix,
        weights: &[&DenseMatrix],
        slopes: &[Real],
    ) -> DenseMatrix {
        let k = kernel.to_dense();
        let mut x = features.clone();
        for (w, &slope) in weights.iter().zip(slopes.iter()) {
            let n = x.rows();
            let mut prop = DenseMatrix::zeros(n, x.cols());
            for i in 0..n {
                for j in 0..x.cols() {
                    let mut acc = 0.0;
                    for t in 0..n {
                        acc += k[(i, t)] * x[(t, j)];
                    }
                    prop[(i, j)] = acc;
                }
            }
            let mut next = DenseMatrix::zeros(n, w.cols());
            for i in 0..n {
                for j in 0..w.cols() {
                    let mut acc = 0.0;
                    for t in 0..x.cols() {
                        acc += prop[(i, t)] * w[(t, j)];
                    }
                    next[(i, j)] = if acc < 0.0 { slope * acc } else { acc };
                }
            }
            x = next;
        }
        x
    }

    #[test]
    fn encoder_matches_straight_line_oracle() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 21);
        let kernel = ring_kernel(dims.nodes);
        let mut rng = stream(77, Domain::Synth, 0);
        let features = DenseMatrix::from_fn(dims.nodes, dims.features, |_, _| {
            rng.gen_range(-1.0..1.0)
        });

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(features.clone());
        let weights: Vec<_> = (0..dims.layers).map(|m| bound.gcn_weight(0, m)).collect();
        let slopes: Vec<_> = (0..dims.layers).map(|m| bound.prelu_slope(0, m)).collect();
        let u = encode_relation(&mut tape, &kernel, x, &weights, &slopes).unwrap();

        let oracle = encoder_oracle(
            &kernel,
            &features,
            &[&params.gcn_weights[0][0], &params.gcn_weights[0][1]],
            &[0.25, 0.25],
        );
        assert!(
            tape.value(u).max_abs_diff(&oracle) <= 1e-10,
            "encoder deviates from the loop oracle"
        );
    }

    #[test]
    fn identity_permutation_reproduces_embeddings_exactly() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 9);
        let kernels = [ring_kernel(dims.nodes), ring_kernel(dims.nodes)];
        let mut rng = stream(31, Domain::Synth, 1);
        let features = DenseMatrix::from_fn(dims.nodes, dims.features, |_, _| {
            rng.gen_range(-1.0..1.0)
        });
        let perms = [identity_perm(dims.nodes), identity_perm(dims.nodes)];
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let fwd = forward(
            &mut tape,
            &bound,
            &ForwardInputs {
                kernels: &kernels,
                features: &features,
                perms: &perms,
                summary: SummaryMode::Cluster,
                multi_label: false,
            },
        )
        .unwrap();
        for r in 0..dims.relations {
            assert_eq!(
                tape.value(fwd.local[r]).data(),
                tape.value(fwd.corrupted[r]).data()
            );
        }
    }

    #[test]
    fn tapeless_embeddings_and_assignments_match_the_tape_bitwise() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 21);
        let kernels = [ring_kernel(dims.nodes), ring_kernel(dims.nodes)];
        let mut rng = stream(77, Domain::Synth, 2);
        let features = DenseMatrix::from_fn(dims.nodes, dims.features, |_, _| {
            rng.gen_range(-1.0..1.0)
        });
        let perms = [identity_perm(dims.nodes), identity_perm(dims.nodes)];
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let fwd = forward(
            &mut tape,
            &bound,
            &ForwardInputs {
                kernels: &kernels,
                features: &features,
                perms: &perms,
                summary: SummaryMode::Cluster,
                multi_label: false,
            },
        )
        .unwrap();

        let plain: Vec<SparseMatrix> = kernels.iter().map(|k| (**k).clone()).collect();
        let locals = embed_relations(&params, &plain, &features).unwrap();
        let assigns = soft_assignments(&params, &locals).unwrap();
        for r in 0..dims.relations {
            assert_eq!(tape.value(fwd.local[r]).data(), locals[r].data());
            assert_eq!(tape.value(fwd.assignments[r]).data(), assigns[r].data());
        }
    }

    #[test]
    fn tapeless_helpers_reject_wrong_shapes() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 4);
        let kernel = (*ring_kernel(dims.nodes)).clone();
        let plain = alloc::vec![kernel.clone(), kernel];
        let bad = DenseMatrix::zeros(dims.nodes, dims.features + 1);
        assert!(matches!(
            embed_relations(&params, &plain, &bad),
            Err(ModelError::Dimension { what: "feature matrix", .. })
        ));
        let bad_local = alloc::vec![
            DenseMatrix::zeros(dims.nodes, dims.embed),
            DenseMatrix::zeros(dims.nodes + 1, dims.embed),
        ];
        assert!(matches!(
            soft_assignments(&params, &bad_local),
            Err(ModelError::Dimension { what: "relation embedding", .. })
        ));
    }

    #[test]
    fn non_permutations_are_rejected() {
        assert!(validate_permutation(&[0, 1, 2], 3).is_ok());
        assert!(matches!(
            validate_permutation(&[0, 1], 3),
            Err(ModelError::NotAPermutation { len: 2, nodes: 3 })
        ));
        assert!(validate_permutation(&[0, 1, 1], 3).is_err());
        assert!(validate_permutation(&[0, 1, 3], 3).is_err());
    }

    #[test]
    fn cluster_assignment_hand_value() {
        let mut tape = Tape::new();
        let u = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 0.0]]));
        let c = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let h = assign_clusters(&mut tape, u, c).unwrap();
        // Logits [1, 0] softmax to about [0.7311, 0.2689].
        assert_relative_eq!(tape.value(h)[(0, 0)], 0.731058578630, epsilon = 1e-9);
        assert_relative_eq!(tape.value(h)[(0, 1)], 0.268941421369, epsilon = 1e-9);
    }

    #[test]
    fn sharper_clusters_from_scaled_embeddings() {
        let mut tape = Tape::new();
        let u = tape.leaf(DenseMatrix::from_rows(&[&[0.4, -0.2, 0.1]]));
        let c = tape.leaf(DenseMatrix::from_rows(&[
            &[1.0, 0.3, -0.2],
            &[-0.5, 0.8, 0.1],
        ]));
        let c10 = tape.scale(c, 10.0);
        let h1 = assign_clusters(&mut tape, u, c).unwrap();
        let h10 = assign_clusters(&mut tape, u, c10).unwrap();
        let max1 = tape.value(h1).row(0).iter().cloned().fold(0.0, Real::max);
        let max10 = tape.value(h10).row(0).iter().cloned().fold(0.0, Real::max);
        assert!(max10 > max1, "scaling logits must sharpen the softmax");
    }

    #[test]
    fn one_hot_assignments_select_cluster_rows() {
        let mut tape = Tape::new();
        let h = tape.leaf(DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let c = tape.leaf(DenseMatrix::from_rows(&[&[0.5, -1.0], &[2.0, 3.0]]));
        let s = contextual_summary(&mut tape, h, c).unwrap();
        assert_eq!(tape.value(s).row(0), tape.value(c).row(1));
        assert_eq!(tape.value(s).row(1), tape.value(c).row(0));
    }

    #[test]
    fn mean_pool_rows_are_shared_and_squashed() {
        let mut tape = Tape::new();
        let u = tape.leaf(DenseMatrix::from_rows(&[&[0.0, 0.0], &[2.0, 2.0], &[4.0, 4.0]]));
        let s = mean_pool_summary(&mut tape, u).unwrap();
        let v = tape.value(s);
        assert_eq!(v.row(0), v.row(1));
        assert_eq!(v.row(1), v.row(2));
        assert_relative_eq!(v[(0, 0)], 0.880797077978, epsilon = 1e-9);
    }

    #[test]
    fn discriminator_hand_values() {
        let id = DenseMatrix::identity(3);
        let e1 = [1.0, 0.0, 0.0];
        assert_relative_eq!(discriminate(&e1, &e1, &id), 0.73106, epsilon = 1e-5);
        let zero_u = [0.0, 0.0, 0.0];
        assert_relative_eq!(discriminate(&zero_u, &e1, &id), 0.5);
        let zero_b = DenseMatrix::zeros(3, 3);
        assert_relative_eq!(discriminate(&e1, &e1, &zero_b), 0.5);
    }

    #[test]
    fn attention_uniform_for_identical_relations() {
        let mut tape = Tape::new();
        let u = tape.leaf(DenseMatrix::from_rows(&[&[0.3, -0.4], &[1.0, 2.0]]));
        let l = tape.leaf(DenseMatrix::from_rows(&[&[0.7, 0.1]]));
        let (attn, agg) = attention_aggregate(&mut tape, &[u, u, u], &[l, l, l]).unwrap();
        for i in 0..2 {
            for r in 0..3 {
                assert_relative_eq!(tape.value(attn)[(i, r)], 1.0 / 3.0, epsilon = 1e-12);
            }
        }
        assert!(tape.value(agg).max_abs_diff(tape.value(u)) <= 1e-12);
    }

    #[test]
    fn attention_hand_value_for_unit_logit_gap() {
        let mut tape = Tape::new();
        // L_r · U_r^i = 1 for relation 0 and 0 for relation 1.
        let u0 = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 0.0]]));
        let u1 = tape.leaf(DenseMatrix::from_rows(&[&[0.0, 1.0]]));
        let l0 = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 0.0]]));
        let l1 = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 0.0]]));
        let (attn, _) = attention_aggregate(&mut tape, &[u0, u1], &[l0, l1]).unwrap();
        assert_relative_eq!(tape.value(attn)[(0, 0)], 0.731058578630, epsilon = 1e-9);
        assert_relative_eq!(tape.value(attn)[(0, 1)], 0.268941421369, epsilon = 1e-9);
    }

    #[test]
    fn predictions_hand_values() {
        let mut tape = Tape::new();
        let z = tape.leaf(DenseMatrix::from_rows(&[&[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0]]));
        let wy = tape.leaf(DenseMatrix::identity(3));
        let single = predict(&mut tape, z, wy, false).unwrap();
        for q in 0..3 {
            assert_relative_eq!(tape.value(single)[(0, q)], 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_relative_eq!(tape.value(single)[(1, 0)], 0.786986, epsilon = 1e-5);
        assert_relative_eq!(tape.value(single)[(1, 1)], 0.106507, epsilon = 1e-5);

        let multi = predict(&mut tape, z, wy, true).unwrap();
        assert_relative_eq!(tape.value(multi)[(0, 0)], 0.5);
    }

    #[test]
    fn stochastic_rows_under_random_parameters() {
        let dims = test_dims();
        for seed in 0..3 {
            let params = ModelParams::init(dims, seed);
            let kernels = [ring_kernel(dims.nodes), ring_kernel(dims.nodes)];
            let mut rng = stream(seed, Domain::Synth, 2);
            let features = DenseMatrix::from_fn(dims.nodes, dims.features, |_, _| {
                rng.gen_range(-1.0..1.0)
            });
            let mut perm0 = identity_perm(dims.nodes);
            let mut perm1 = identity_perm(dims.nodes);
            perm0.reverse();
            perm1.rotate_left(3);
            let perms = [perm0, perm1];
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let fwd = forward(
                &mut tape,
                &bound,
                &ForwardInputs {
                    kernels: &kernels,
                    features: &features,
                    perms: &perms,
                    summary: SummaryMode::Cluster,
                    multi_label: false,
                },
            )
            .unwrap();
            for r in 0..dims.relations {
                for i in 0..dims.nodes {
                    let s: Real = tape.value(fwd.assignments[r]).row(i).iter().sum();
                    assert_relative_eq!(s, 1.0, epsilon = 1e-9);
                }
            }
            for i in 0..dims.nodes {
                let s: Real = tape.value(fwd.attention).row(i).iter().sum();
                assert_relative_eq!(s, 1.0, epsilon = 1e-9);
                let p: Real = tape.value(fwd.predictions).row(i).iter().sum();
                assert_relative_eq!(p, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn encoder_is_permutation_equivariant() {
        let dims = test_dims();
        let params = ModelParams::init(dims, 17);
        let kernel = ring_kernel(dims.nodes);
        let mut rng = stream(5, Domain::Synth, 3);
        let features = DenseMatrix::from_fn(dims.nodes, dims.features, |_, _| {
            rng.gen_range(-1.0..1.0)
        });

        // Relabel nodes by pi: kernel entries and feature rows move together.
        let pi: Vec<usize> = [3, 1, 4, 0, 6, 2, 7, 5].to_vec();
        let permuted_kernel = {
            let triplets: Vec<(usize, usize, Real)> = kernel
                .iter()
                .map(|(i, j, w)| (pi[i], pi[j], w))
                .collect();
            Rc::new(SparseMatrix::from_triplets(dims.nodes, dims.nodes, &triplets).unwrap())
        };
        let mut permuted_features = DenseMatrix::zeros(dims.nodes, dims.features);
        for i in 0..dims.nodes {
            permuted_features
                .row_mut(pi[i])
                .copy_from_slice(features.row(i));
        }

        let encode = |kernel: &Rc<SparseMatrix>, feats: &DenseMatrix| -> DenseMatrix {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let x = tape.constant(feats.clone());
            let weights: Vec<_> = (0..dims.layers).map(|m| bound.gcn_weight(0, m)).collect();
            let slopes: Vec<_> = (0..dims.layers).map(|m| bound.prelu_slope(0, m)).collect();
            let u = encode_relation(&mut tape, kernel, x, &weights, &slopes).unwrap();
            tape.value(u).clone()
        };
        let base = encode(&kernel, &features);
        let moved = encode(&permuted_kernel, &permuted_features);
        for i in 0..dims.nodes {
            for j in 0..dims.embed {
                assert!(
                    (base[(i, j)] - moved[(pi[i], j)]).abs() <= 1e-10,
                    "row {i} does not track its relabeling"
                );
            }
        }
    }

    #[test]
    fn predict_probs_matches_tape_path() {
        let dims = test_dims();
        let mut params = ModelParams::init(dims, 2);
        let mut rng = stream(2, Domain::Synth, 4);
        params.consensus = DenseMatrix::from_fn(dims.nodes, dims.embed, |_, _| {
            rng.gen_range(-1.0..1.0)
        });
        let plain = predict_probs(&params, false);
        let mut tape = Tape::new();
        let z = tape.leaf(params.consensus.clone());
        let wy = tape.leaf(params.label_head.clone());
        let taped = predict(&mut tape, z, wy, false).unwrap();
        assert_eq!(plain.data(), tape.value(taped).data());
    }
}
