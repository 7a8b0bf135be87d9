//! Full-graph transductive training: one optimizer step per epoch with fresh
//! corruption permutations, early stopping on validation Micro-F1, and grid
//! search over the regularization strengths.

use alloc::rc::Rc;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{f1_scores, EvalError};
use crate::graph::{
    label_similarity_kernel, laplacian, propagation_kernel, GraphError, MultiplexGraph, Split,
};
use crate::math::{powf, sqrt, Real};
use crate::model::{forward, predict_probs, Dims, ForwardInputs, ModelError, ModelParams, SummaryMode};
use crate::objective::{
    cross_terms, total_loss, Coefficients, LossBreakdown, ObjectiveContext, ObjectiveError,
};
use crate::rng::{stream, Domain};
use crate::tensor::{DenseMatrix, SparseMatrix, Tape, TensorError};

/// Everything the training loop needs besides the graph and the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: Real,
    /// L2 penalty added to every parameter's gradient (consensus included,
    /// since its loss term alone would let it drift unbounded).
    pub weight_decay: Real,
    pub max_epochs: usize,
    /// Epochs without a strict validation improvement before stopping.
    pub patience: usize,
    /// Embedding width per relation.
    pub embed: usize,
    /// Graph convolution layers per relation.
    pub layers: usize,
    /// Cluster count; `None` uses the number of labels.
    pub clusters: Option<usize>,
    /// Self-loop weight of the propagation kernel.
    pub epsilon: Real,
    /// Negative samples per node in the contrastive term.
    pub negatives: usize,
    pub coefficients: Coefficients,
    pub seed: u64,
    pub summary: SummaryMode,
    pub multi_label: bool,
    /// Use plain gradient descent instead of adaptive moments (useful for
    /// gradient audits, where the adaptive rescaling obscures magnitudes).
    pub plain_gd: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            weight_decay: 1e-4,
            max_epochs: 10_000,
            patience: 20,
            embed: 64,
            layers: 2,
            clusters: None,
            epsilon: 3.0,
            negatives: 1,
            coefficients: Coefficients::default(),
            seed: 0,
            summary: SummaryMode::Cluster,
            multi_label: false,
            plain_gd: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |name: &'static str| Err(TrainError::BadParameter { name });
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs");
        }
        if self.patience == 0 {
            return bad("patience");
        }
        if self.embed == 0 {
            return bad("embed");
        }
        if self.layers == 0 {
            return bad("layers");
        }
        if self.clusters.is_some_and(|k| k < 2) {
            return bad("clusters");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon");
        }
        if self.negatives == 0 {
            return bad("negatives");
        }
        self.coefficients.validate()?;
        Ok(())
    }
}

/// Errors raised by training and grid search.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    /// A configuration field is out of range.
    BadParameter { name: &'static str },
    /// The config's label mode contradicts the graph's.
    MultiLabelMismatch { graph: bool, config: bool },
    /// The loss left the finite range; `term` is the first bad summand.
    Diverged { epoch: usize, term: &'static str },
    /// Grid search needs at least one cell.
    EmptyGrid,
    /// Every grid cell diverged, so no config can be selected.
    AllCellsDiverged,
    Graph(GraphError),
    Model(ModelError),
    Objective(ObjectiveError),
    Eval(EvalError),
    Tensor(TensorError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::BadParameter { name } => {
                write!(f, "training parameter out of range: {name}")
            }
            TrainError::MultiLabelMismatch { graph, config } => write!(
                f,
                "config says multi_label={config} but the graph says {graph}"
            ),
            TrainError::Diverged { epoch, term } => {
                write!(f, "loss diverged at epoch {epoch}: term `{term}` is not finite")
            }
            TrainError::EmptyGrid => write!(f, "grid search needs at least one value per axis"),
            TrainError::AllCellsDiverged => {
                write!(f, "every grid cell diverged; no configuration selectable")
            }
            TrainError::Graph(e) => write!(f, "{e}"),
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Objective(e) => write!(f, "{e}"),
            TrainError::Eval(e) => write!(f, "{e}"),
            TrainError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<GraphError> for TrainError {
    fn from(e: GraphError) -> Self {
        TrainError::Graph(e)
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

impl From<ObjectiveError> for TrainError {
    fn from(e: ObjectiveError) -> Self {
        TrainError::Objective(e)
    }
}

impl From<EvalError> for TrainError {
    fn from(e: EvalError) -> Self {
        TrainError::Eval(e)
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Tensor(e)
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Validation Micro-F1 saw no strict improvement for `patience` epochs.
    EarlyStopped,
    ReachedMaxEpochs,
}

/// One epoch of the training log: the loss evaluated on the pre-step
/// parameters and the validation metric of the post-step parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub losses: LossBreakdown,
    pub val_micro_f1: Real,
}

/// Complete record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stop: StopReason,
}

impl TrainLog {
    /// Validation Micro-F1 of the returned parameters — the maximum over all
    /// logged epochs.
    pub fn best_val_micro_f1(&self) -> Real {
        self.epochs[self.best_epoch - 1].val_micro_f1
    }
}

/// Adaptive-moment (or plain) gradient descent over the parameter list, with
/// the L2 penalty folded into every gradient.
struct Optimizer {
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
    steps: u64,
    learning_rate: Real,
    weight_decay: Real,
    plain: bool,
}

const MOMENT_DECAY_1: Real = 0.9;
const MOMENT_DECAY_2: Real = 0.999;
const MOMENT_EPS: Real = 1e-8;

impl Optimizer {
    fn new(params: &ModelParams, config: &TrainConfig) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .tensors()
            .iter()
            .map(|t| DenseMatrix::zeros(t.rows(), t.cols()))
            .collect();
        Optimizer {
            first: zeros.clone(),
            second: zeros,
            steps: 0,
            learning_rate: config.learning_rate,
            weight_decay: config.weight_decay,
            plain: config.plain_gd,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &[DenseMatrix]) {
        self.steps += 1;
        let correction_1 = 1.0 - powf(MOMENT_DECAY_1, self.steps as Real);
        let correction_2 = 1.0 - powf(MOMENT_DECAY_2, self.steps as Real);
        for (idx, tensor) in params.tensors_mut().into_iter().enumerate() {
            let gradient = grads[idx].data();
            let first = self.first[idx].data_mut();
            let second = self.second[idx].data_mut();
            for (pos, value) in tensor.data_mut().iter_mut().enumerate() {
                let g = gradient[pos] + self.weight_decay * *value;
                if self.plain {
                    *value -= self.learning_rate * g;
                } else {
                    first[pos] = MOMENT_DECAY_1 * first[pos] + (1.0 - MOMENT_DECAY_1) * g;
                    second[pos] = MOMENT_DECAY_2 * second[pos] + (1.0 - MOMENT_DECAY_2) * g * g;
                    let m_hat = first[pos] / correction_1;
                    let v_hat = second[pos] / correction_2;
                    *value -= self.learning_rate * m_hat / (sqrt(v_hat) + MOMENT_EPS);
                }
            }
        }
    }
}

/// Name of the first non-finite loss term, checked in log-column order.
fn first_non_finite(b: &LossBreakdown) -> Option<&'static str> {
    [
        ("mi", b.mi),
        ("cross", b.cross),
        ("cons", b.cons),
        ("clus_learn", b.clus_learn),
        ("clus_orth", b.clus_orth),
        ("sup", b.sup),
        ("total", b.total),
    ]
    .into_iter()
    .find(|(_, v)| !v.is_finite())
    .map(|(name, _)| name)
}

/// Micro-F1 (percent) of predicted probabilities on the given nodes.
fn micro_f1_on(
    probs: &DenseMatrix,
    labels: &DenseMatrix,
    nodes: &[usize],
    multi_label: bool,
) -> Result<Real, EvalError> {
    let (micro, _) = f1_scores(
        &probs.select_rows(nodes),
        &labels.select_rows(nodes),
        multi_label,
    )?;
    Ok(micro)
}

/// Everything a finished run produces: the best-epoch snapshot, the final
/// parameters, and the log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best: ModelParams,
    pub last: ModelParams,
    pub log: TrainLog,
}

/// Trains the model on the full graph; see [`run_training`] for the loop's
/// behaviour. Returns the best-epoch parameters and the log.
pub fn train(
    g: &MultiplexGraph,
    split: &Split,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainLog), TrainError> {
    let outcome = run_training(g, split, config)?;
    Ok((outcome.best, outcome.log))
}

/// Trains the model on the full graph.
///
/// Each epoch records the loss of one forward pass, applies one optimizer
/// step, and scores validation Micro-F1 on the updated parameters.
/// Corruption permutations and the negative-pairing stride are redrawn every
/// epoch from the seeded stream. The best snapshot is the epoch with the
/// highest validation score; an equal score keeps the snapshot with the
/// lower total loss but still counts toward patience, which only a strict
/// improvement resets.
pub fn run_training(
    g: &MultiplexGraph,
    split: &Split,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if config.multi_label != g.multi_label() {
        return Err(TrainError::MultiLabelMismatch {
            graph: g.multi_label(),
            config: config.multi_label,
        });
    }
    let n = g.num_nodes();
    let relations = g.num_relations();

    let kernels: Vec<Rc<SparseMatrix>> = (0..relations)
        .map(|r| propagation_kernel(g.intra(r), config.epsilon).map(Rc::new))
        .collect::<Result<_, _>>()?;
    let similarity = label_similarity_kernel(g, &split.train)?;
    let lap = Rc::new(laplacian(&similarity)?);
    let cross = cross_terms(g);

    let dims = Dims {
        nodes: n,
        features: g.num_features(),
        embed: config.embed,
        layers: config.layers,
        clusters: config.clusters.unwrap_or_else(|| g.num_labels()),
        labels: g.num_labels(),
        relations,
    };
    let mut params = ModelParams::init(dims, config.seed);
    let mut optimizer = Optimizer::new(&params, config);

    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(ModelParams, Real, Real, usize)> = None;
    let mut streak = 0usize;
    let mut stop = StopReason::ReachedMaxEpochs;

    for epoch in 1..=config.max_epochs {
        let mut rng = stream(config.seed, Domain::Corrupt, epoch as u64);
        let perms: Vec<Vec<usize>> = (0..relations)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let stride = if n > 1 { rng.gen_range(1..n) } else { 0 };

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let inputs = ForwardInputs {
            kernels: &kernels,
            features: g.features(),
            perms: &perms,
            summary: config.summary,
            multi_label: config.multi_label,
        };
        let fwd = forward(&mut tape, &bound, &inputs)?;
        let ctx = ObjectiveContext {
            laplacian: &lap,
            cross: &cross,
            labels: g.labels(),
            train: &split.train,
            multi_label: config.multi_label,
            negatives: config.negatives,
            stride,
        };
        let (loss, losses) = total_loss(&mut tape, &fwd, &bound, &ctx, config.coefficients)?;
        if let Some(term) = first_non_finite(&losses) {
            return Err(TrainError::Diverged { epoch, term });
        }
        tape.backward(loss)?;
        let grads: Vec<DenseMatrix> = bound
            .handles()
            .iter()
            .map(|&h| tape.grad(h).clone())
            .collect();
        optimizer.step(&mut params, &grads);

        let probs = predict_probs(&params, config.multi_label);
        let val_micro_f1 = micro_f1_on(&probs, g.labels(), &split.val, config.multi_label)?;
        epochs.push(EpochRecord {
            epoch,
            losses,
            val_micro_f1,
        });

        match &best {
            Some((_, best_val, _, _)) if val_micro_f1 > *best_val => {
                best = Some((params.clone(), val_micro_f1, losses.total, epoch));
                streak = 0;
            }
            Some((_, best_val, best_total, _))
                if val_micro_f1 == *best_val && losses.total < *best_total =>
            {
                best = Some((params.clone(), val_micro_f1, losses.total, epoch));
                streak += 1;
            }
            Some(_) => streak += 1,
            None => {
                best = Some((params.clone(), val_micro_f1, losses.total, epoch));
            }
        }
        if streak >= config.patience {
            stop = StopReason::EarlyStopped;
            break;
        }
    }

    let (best_params, _, _, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best: best_params,
        last: params,
        log: TrainLog {
            epochs,
            best_epoch,
            stop,
        },
    })
}

/// Axes of the hyperparameter grid. `zetas` sets both cluster-term weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gammas: Vec<Real>,
    pub zetas: Vec<Real>,
    pub thetas: Vec<Real>,
    pub learning_rates: Vec<Real>,
}

/// One trained grid cell. A diverged run keeps its config but no score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub config: TrainConfig,
    pub val_micro_f1: Option<Real>,
    pub best_epoch: Option<usize>,
}

/// Full grid table plus the winning cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub best_index: usize,
}

impl GridOutcome {
    pub fn best_config(&self) -> &TrainConfig {
        &self.cells[self.best_index].config
    }
}

/// Trains every cell of the grid (γ outermost, then ζ, θ, learning rate) and
/// selects the best cell by validation Micro-F1, preferring the earlier cell
/// on ties. Diverged cells are recorded without a score; any other failure
/// aborts the search.
pub fn grid_search(
    g: &MultiplexGraph,
    split: &Split,
    base: &TrainConfig,
    grid: &GridSpec,
) -> Result<GridOutcome, TrainError> {
    if grid.gammas.is_empty()
        || grid.zetas.is_empty()
        || grid.thetas.is_empty()
        || grid.learning_rates.is_empty()
    {
        return Err(TrainError::EmptyGrid);
    }
    let mut cells = Vec::new();
    for &gamma in &grid.gammas {
        for &zeta in &grid.zetas {
            for &theta in &grid.thetas {
                for &learning_rate in &grid.learning_rates {
                    let mut config = base.clone();
                    config.coefficients.gamma = gamma;
                    config.coefficients.zeta_learn = zeta;
                    config.coefficients.zeta_orth = zeta;
                    config.coefficients.theta = theta;
                    config.learning_rate = learning_rate;
                    match train(g, split, &config) {
                        Ok((_, log)) => cells.push(GridCell {
                            config,
                            val_micro_f1: Some(log.best_val_micro_f1()),
                            best_epoch: Some(log.best_epoch),
                        }),
                        Err(TrainError::Diverged { .. }) => cells.push(GridCell {
                            config,
                            val_micro_f1: None,
                            best_epoch: None,
                        }),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    let mut best_index: Option<usize> = None;
    let mut best_val = Real::NEG_INFINITY;
    for (idx, cell) in cells.iter().enumerate() {
        if let Some(val) = cell.val_micro_f1 {
            if best_index.is_none() || val > best_val {
                best_index = Some(idx);
                best_val = val;
            }
        }
    }
    match best_index {
        Some(best_index) => Ok(GridOutcome { cells, best_index }),
        None => Err(TrainError::AllCellsDiverged),
    }
}
