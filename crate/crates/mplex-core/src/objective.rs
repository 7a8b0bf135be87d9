//! The six loss terms and their weighted combination.
//!
//! Every term is recorded on the same [`Tape`] as the forward pass and
//! normalized by its natural count (relations, nodes, train nodes, masked
//! rows) so coefficients transfer across graph sizes. A zero coefficient
//! skips its term entirely: no tape nodes are built, so the gradient through
//! that term is exactly zero.

use alloc::rc::Rc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::MultiplexGraph;
use crate::math::{Real, EPS_PROB};
use crate::model::{BoundParams, Forward, ModelError};
use crate::tensor::{DenseMatrix, DiffValue, SparseMatrix, Tape, TensorError};

/// Errors raised while assembling the objective.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveError {
    /// A loss coefficient is negative or non-finite.
    BadCoefficient { name: &'static str, value: Real },
    /// The contrastive loss needs at least one negative per node.
    NoNegatives,
    /// The supervised loss needs a non-empty train set.
    EmptyTrainSet,
    /// A forward-model step failed.
    Model(ModelError),
    /// A tensor operation failed.
    Tensor(TensorError),
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveError::BadCoefficient { name, value } => {
                write!(f, "coefficient {name} must be nonnegative and finite, got {value}")
            }
            ObjectiveError::NoNegatives => {
                write!(f, "contrastive loss needs at least 1 negative per node")
            }
            ObjectiveError::EmptyTrainSet => {
                write!(f, "supervised loss needs a non-empty train set")
            }
            ObjectiveError::Model(e) => write!(f, "{e}"),
            ObjectiveError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ObjectiveError {}

impl From<ModelError> for ObjectiveError {
    fn from(e: ModelError) -> Self {
        ObjectiveError::Model(e)
    }
}

impl From<TensorError> for ObjectiveError {
    fn from(e: TensorError) -> Self {
        ObjectiveError::Tensor(e)
    }
}

/// Weights of the six loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// Contrastive mutual-information term.
    pub alpha: Real,
    /// Cross-layer regularizer.
    pub beta: Real,
    /// Consensus regularizer.
    pub gamma: Real,
    /// Label-smoothness cluster term.
    pub zeta_learn: Real,
    /// Assignment-orthogonality cluster term.
    pub zeta_orth: Real,
    /// Supervised cross-entropy.
    pub theta: Real,
}

impl Default for Coefficients {
    /// Contrastive and cross-layer weights as fixed throughout the method's
    /// experiments; the searched regularizers default to the middle of their
    /// usual grid `{0.001, 0.01, 0.1}`.
    fn default() -> Self {
        Coefficients {
            alpha: 1.0,
            beta: 0.001,
            gamma: 0.1,
            zeta_learn: 0.1,
            zeta_orth: 0.1,
            theta: 0.1,
        }
    }
}

impl Coefficients {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("zeta_learn", self.zeta_learn),
            ("zeta_orth", self.zeta_orth),
            ("theta", self.theta),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ObjectiveError::BadCoefficient { name, value });
            }
        }
        Ok(())
    }
}

/// Per-term values of one objective evaluation. Terms skipped because their
/// coefficient is zero are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mi: Real,
    pub cross: Real,
    pub cons: Real,
    pub clus_learn: Real,
    pub clus_orth: Real,
    pub sup: Real,
    pub total: Real,
    pub coefficients: Coefficients,
}

/// One cross-layer regularization term: the stored adjacency from relation
/// `from` to relation `to`, plus the diagonal mask selecting rows with at
/// least one cross edge.
pub struct CrossTerm {
    pub from: usize,
    pub to: usize,
    pub adjacency: Rc<SparseMatrix>,
    pub row_mask: Rc<SparseMatrix>,
    pub active_rows: usize,
}

/// Precompute the cross-layer terms of a graph (constant across epochs).
pub fn cross_terms(g: &MultiplexGraph) -> Vec<CrossTerm> {
    let n = g.num_nodes();
    let mut terms = Vec::new();
    for (r, s) in g.cross_pairs() {
        let a = g.cross(r, s).expect("pair key implies a stored matrix");
        let mut active = alloc::vec![0.0; n];
        for (i, _, w) in a.iter() {
            if w != 0.0 {
                active[i] = 1.0;
            }
        }
        let active_rows = active.iter().filter(|&&x| x != 0.0).count();
        terms.push(CrossTerm {
            from: r,
            to: s,
            adjacency: Rc::new(a.clone()),
            row_mask: Rc::new(SparseMatrix::diagonal(&active)),
            active_rows,
        });
    }
    terms
}

/// Clamp probabilities away from 0 and 1, then take the log.
fn safe_log(tape: &mut Tape, probs: DiffValue) -> Result<DiffValue, ObjectiveError> {
    let clamped = tape.clamp(probs, EPS_PROB, 1.0 - EPS_PROB);
    Ok(tape.log(clamped)?)
}

/// Per-node bilinear logits `diag(U B S^T)` as an n x 1 column.
fn pair_logits(
    tape: &mut Tape,
    embeds: DiffValue,
    bilinear: DiffValue,
    summaries: DiffValue,
) -> Result<DiffValue, ObjectiveError> {
    let ub = tape.matmul(embeds, bilinear)?;
    let prod = tape.hadamard(ub, summaries)?;
    Ok(tape.row_sum(prod))
}

/// Contrastive mutual-information loss: the negated mean log-likelihood of
/// true pairs against `negatives` corrupted rows per node. The j-th negative
/// for node `i` is the corrupted embedding at `(i + j * stride) mod |V|`.
pub fn loss_infomax(
    tape: &mut Tape,
    fwd: &Forward,
    bilinear: DiffValue,
    negatives: usize,
    stride: usize,
) -> Result<DiffValue, ObjectiveError> {
    if negatives < 1 {
        return Err(ObjectiveError::NoNegatives);
    }
    let relations = fwd.local.len();
    let nodes = tape.value(fwd.local[0]).rows();

    let mut sum: Option<DiffValue> = None;
    let push = |tape: &mut Tape, term: DiffValue, acc: &mut Option<DiffValue>| {
        *acc = Some(match *acc {
            None => term,
            Some(t) => tape.add(t, term).expect("scalar accumulation"),
        });
    };
    for r in 0..relations {
        let pos_logits = pair_logits(tape, fwd.local[r], bilinear, fwd.summaries[r])?;
        let pos_probs = tape.sigmoid(pos_logits);
        let pos_log = safe_log(tape, pos_probs)?;
        let pos_sum = tape.reduce_sum(pos_log);
        push(tape, pos_sum, &mut sum);

        // All corrupted logits at once, then row-shifted views per negative.
        let neg_logits_all = pair_logits(tape, fwd.corrupted[r], bilinear, fwd.summaries[r])?;
        for j in 1..=negatives {
            let indices: Vec<usize> = (0..nodes).map(|i| (i + j * stride) % nodes).collect();
            let shifted = tape.row_gather(neg_logits_all, &indices)?;
            // log(1 - sigmoid(x)) = log(sigmoid(-x)).
            let negated = tape.scale(shifted, -1.0);
            let neg_probs = tape.sigmoid(negated);
            let neg_log = safe_log(tape, neg_probs)?;
            let neg_sum = tape.reduce_sum(neg_log);
            push(tape, neg_sum, &mut sum);
        }
    }
    let total = sum.expect("at least one relation");
    let norm = (relations * nodes * (1 + negatives)) as Real;
    Ok(tape.scale(total, -1.0 / norm))
}

/// Assignment-overlap penalty `‖H^T H − I‖_F²`, averaged over relations.
pub fn loss_orthogonal(
    tape: &mut Tape,
    assignments: &[DiffValue],
) -> Result<DiffValue, ObjectiveError> {
    let mut sum: Option<DiffValue> = None;
    for &h in assignments {
        let k = tape.value(h).cols();
        let ht = tape.transpose(h);
        let gram = tape.matmul(ht, h)?;
        let eye = tape.constant(DenseMatrix::identity(k));
        let diff = tape.sub(gram, eye)?;
        let f = tape.frobenius_sq(diff);
        sum = Some(match sum {
            None => f,
            Some(t) => tape.add(t, f)?,
        });
    }
    let total = sum.expect("at least one relation");
    Ok(tape.scale(total, 1.0 / assignments.len() as Real))
}

/// Label-smoothness penalty `trace(H^T Δ H)` against a fixed Laplacian,
/// averaged over relations.
pub fn loss_cluster_learn(
    tape: &mut Tape,
    assignments: &[DiffValue],
    laplacian: &Rc<SparseMatrix>,
) -> Result<DiffValue, ObjectiveError> {
    let mut sum: Option<DiffValue> = None;
    for &h in assignments {
        let lh = tape.spmm(laplacian.clone(), h)?;
        let prod = tape.hadamard(h, lh)?;
        let t = tape.reduce_sum(prod);
        sum = Some(match sum {
            None => t,
            Some(acc) => tape.add(acc, t)?,
        });
    }
    let total = sum.expect("at least one relation");
    Ok(tape.scale(total, 1.0 / assignments.len() as Real))
}

/// Cross-layer alignment `Σ ‖O U_r − A U_s‖_F²` over stored relation pairs,
/// normalized by the total number of unmasked rows.
pub fn loss_cross(
    tape: &mut Tape,
    locals: &[DiffValue],
    terms: &[CrossTerm],
) -> Result<DiffValue, ObjectiveError> {
    let total_rows: usize = terms.iter().map(|t| t.active_rows).sum();
    if total_rows == 0 {
        return Ok(tape.constant(DenseMatrix::zeros(1, 1)));
    }
    let mut sum: Option<DiffValue> = None;
    for term in terms {
        let masked = tape.spmm(term.row_mask.clone(), locals[term.from])?;
        let projected = tape.spmm(term.adjacency.clone(), locals[term.to])?;
        let diff = tape.sub(masked, projected)?;
        let f = tape.frobenius_sq(diff);
        sum = Some(match sum {
            None => f,
            Some(t) => tape.add(t, f)?,
        });
    }
    let total = sum.expect("nonzero active rows implies a term");
    Ok(tape.scale(total, 1.0 / total_rows as Real))
}

/// Consensus attraction/repulsion `(‖Z−U‖_F² − ‖Z−Ũ‖_F²) / |V|`.
pub fn loss_consensus(
    tape: &mut Tape,
    consensus: DiffValue,
    aggregated: DiffValue,
    aggregated_corrupted: DiffValue,
) -> Result<DiffValue, ObjectiveError> {
    let nodes = tape.value(consensus).rows();
    let d_true = tape.sub(consensus, aggregated)?;
    let f_true = tape.frobenius_sq(d_true);
    let d_corrupt = tape.sub(consensus, aggregated_corrupted)?;
    let f_corrupt = tape.frobenius_sq(d_corrupt);
    let diff = tape.sub(f_true, f_corrupt)?;
    Ok(tape.scale(diff, 1.0 / nodes as Real))
}

/// Cross-entropy over train nodes: categorical (single-label) or mean binary
/// (multi-label, additionally averaged over label bits).
pub fn loss_supervised(
    tape: &mut Tape,
    predictions: DiffValue,
    labels: &DenseMatrix,
    train: &[usize],
    multi_label: bool,
) -> Result<DiffValue, ObjectiveError> {
    if train.is_empty() {
        return Err(ObjectiveError::EmptyTrainSet);
    }
    let q = labels.cols();
    let y = DenseMatrix::from_fn(train.len(), q, |k, j| labels[(train[k], j)]);

    let yhat = tape.row_gather(predictions, train)?;
    let log_p = safe_log(tape, yhat)?;
    let y_const = tape.constant(y.clone());
    let pos = tape.hadamard(y_const, log_p)?;
    let mut sum = tape.reduce_sum(pos);

    if multi_label {
        let ones = tape.constant(DenseMatrix::from_elem(train.len(), q, 1.0));
        let one_minus_p = tape.sub(ones, yhat)?;
        let log_q = safe_log(tape, one_minus_p)?;
        let y_flip = tape.constant(y.map(|b| 1.0 - b));
        let neg = tape.hadamard(y_flip, log_q)?;
        let neg_sum = tape.reduce_sum(neg);
        sum = tape.add(sum, neg_sum)?;
    }
    let denom = if multi_label {
        (train.len() * q) as Real
    } else {
        train.len() as Real
    };
    Ok(tape.scale(sum, -1.0 / denom))
}

/// Constant inputs of the combined objective.
pub struct ObjectiveContext<'a> {
    /// Laplacian of the train-masked label-similarity kernel.
    pub laplacian: &'a Rc<SparseMatrix>,
    /// Precomputed cross-layer terms (possibly empty).
    pub cross: &'a [CrossTerm],
    /// Full label matrix.
    pub labels: &'a DenseMatrix,
    /// Train node ids.
    pub train: &'a [usize],
    pub multi_label: bool,
    /// Negatives per node for the contrastive term.
    pub negatives: usize,
    /// Row offset stride for negative pairing, drawn per epoch.
    pub stride: usize,
}

/// Weighted sum of all six terms. Terms with a zero coefficient are skipped
/// entirely, leaving their parameters out of the gradient.
pub fn total_loss(
    tape: &mut Tape,
    fwd: &Forward,
    bound: &BoundParams,
    ctx: &ObjectiveContext<'_>,
    coefficients: Coefficients,
) -> Result<(DiffValue, LossBreakdown), ObjectiveError> {
    coefficients.validate()?;

    let mut weighted: Vec<(DiffValue, Real)> = Vec::new();
    let record = |tape: &Tape, v: Option<DiffValue>| v.map_or(0.0, |dv| tape.scalar(dv));

    let mi = if coefficients.alpha > 0.0 {
        Some(loss_infomax(tape, fwd, bound.bilinear(), ctx.negatives, ctx.stride)?)
    } else {
        None
    };
    let cross = if coefficients.beta > 0.0 {
        Some(loss_cross(tape, &fwd.local, ctx.cross)?)
    } else {
        None
    };
    let cons = if coefficients.gamma > 0.0 {
        Some(loss_consensus(
            tape,
            bound.consensus(),
            fwd.aggregated,
            fwd.aggregated_corrupted,
        )?)
    } else {
        None
    };
    let clus_learn = if coefficients.zeta_learn > 0.0 {
        Some(loss_cluster_learn(tape, &fwd.assignments, ctx.laplacian)?)
    } else {
        None
    };
    let clus_orth = if coefficients.zeta_orth > 0.0 {
        Some(loss_orthogonal(tape, &fwd.assignments)?)
    } else {
        None
    };
    let sup = if coefficients.theta > 0.0 {
        Some(loss_supervised(
            tape,
            fwd.predictions,
            ctx.labels,
            ctx.train,
            ctx.multi_label,
        )?)
    } else {
        None
    };

    for (term, coeff) in [
        (mi, coefficients.alpha),
        (cross, coefficients.beta),
        (cons, coefficients.gamma),
        (clus_learn, coefficients.zeta_learn),
        (clus_orth, coefficients.zeta_orth),
        (sup, coefficients.theta),
    ] {
        if let Some(dv) = term {
            weighted.push((dv, coeff));
        }
    }
    let total = if weighted.is_empty() {
        tape.constant(DenseMatrix::zeros(1, 1))
    } else {
        let mut acc: Option<DiffValue> = None;
        for (dv, coeff) in weighted {
            let scaled = tape.scale(dv, coeff);
            acc = Some(match acc {
                None => scaled,
                Some(t) => tape.add(t, scaled)?,
            });
        }
        acc.expect("nonempty weighted terms")
    };

    let breakdown = LossBreakdown {
        mi: record(tape, mi),
        cross: record(tape, cross),
        cons: record(tape, cons),
        clus_learn: record(tape, clus_learn),
        clus_orth: record(tape, clus_orth),
        sup: record(tape, sup),
        total: tape.scalar(total),
        coefficients,
    };
    Ok((total, breakdown))
}
