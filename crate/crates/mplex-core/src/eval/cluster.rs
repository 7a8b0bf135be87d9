//! Embedding clustering and its agreement with ground-truth labels.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::nmi::{nmi, onmi};
use super::EvalError;
use crate::math::{abs, Real};
use crate::rng::{stream, Domain};
use crate::tensor::DenseMatrix;

const RESTARTS: u64 = 10;
const MAX_ITERS: usize = 300;
const FUZZIFIER_TOL: Real = 1e-5;

fn sq_dist(a: &[Real], b: &[Real]) -> Real {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Index of the largest entry, ties broken by the lowest index.
fn argmax(row: &[Real]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn validate_k(k: usize, points: usize) -> Result<(), EvalError> {
    if k < 2 {
        return Err(EvalError::BadClusterCount { k });
    }
    if k > points {
        return Err(EvalError::TooManyClusters { k, points });
    }
    Ok(())
}

/// One Lloyd run from a distance-weighted seeding; returns assignments and
/// the final within-cluster sum of squared distances.
fn lloyd_run(points: &DenseMatrix, k: usize, rng: &mut impl Rng) -> (Vec<usize>, Real) {
    let n = points.rows();
    let d = points.cols();

    // Distance-weighted seeding: first center uniform, then each next center
    // drawn with probability proportional to squared distance from the
    // nearest chosen center.
    let mut centers: Vec<Vec<Real>> = Vec::with_capacity(k);
    centers.push(points.row(rng.gen_range(0..n)).to_vec());
    let mut nearest = vec![Real::INFINITY; n];
    while centers.len() < k {
        let last = centers.last().unwrap();
        let mut total = 0.0;
        for i in 0..n {
            let dist = sq_dist(points.row(i), last);
            if dist < nearest[i] {
                nearest[i] = dist;
            }
            total += nearest[i];
        }
        let pick = if total > 0.0 {
            let mut target = rng.gen::<Real>() * total;
            let mut chosen = n - 1;
            for i in 0..n {
                target -= nearest[i];
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with a chosen center; any pick is as good.
            rng.gen_range(0..n)
        };
        centers.push(points.row(pick).to_vec());
    }

    let mut assign = vec![0usize; n];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_dist = sq_dist(points.row(i), &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let dist = sq_dist(points.row(i), center);
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, &x) in sums[assign[i]].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (center, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *center = s / counts[c] as Real;
                }
            }
            // An emptied cluster keeps its previous center.
        }
    }

    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), &centers[assign[i]]))
        .sum();
    (assign, inertia)
}

/// K-means clustering of embedding rows: ten seeded restarts of Lloyd's
/// algorithm with distance-weighted seeding, keeping the restart with the
/// lowest within-cluster sum of squares (earliest restart on ties).
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if points.rows() == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    validate_k(k, points.rows())?;
    let mut best: Option<(Vec<usize>, Real)> = None;
    for restart in 0..RESTARTS {
        let mut rng = stream(seed, Domain::Cluster, restart);
        let (assign, inertia) = lloyd_run(points, k, &mut rng);
        let better = match &best {
            Some((_, best_inertia)) => inertia < *best_inertia,
            None => true,
        };
        if better {
            best = Some((assign, inertia));
        }
    }
    Ok(best.unwrap().0)
}

/// Fuzzy c-means memberships (fuzzifier 2) for embedding rows.
///
/// Returns a row-stochastic `points x k` membership matrix. Iterations stop
/// when the largest membership change falls below `1e-5` or after 300 rounds.
pub fn fuzzy_cmeans(points: &DenseMatrix, k: usize, seed: u64) -> Result<DenseMatrix, EvalError> {
    let n = points.rows();
    let d = points.cols();
    if n == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    validate_k(k, n)?;

    let mut rng = stream(seed, Domain::Cluster, 0);
    let mut memberships = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let mut total = 0.0;
        for c in 0..k {
            let u = rng.gen::<Real>().max(1e-6);
            memberships[(i, c)] = u;
            total += u;
        }
        for c in 0..k {
            memberships[(i, c)] /= total;
        }
    }

    let mut centers = vec![vec![0.0; d]; k];
    for _ in 0..MAX_ITERS {
        // Centers from squared memberships.
        for (c, center) in centers.iter_mut().enumerate() {
            let mut weight = 0.0;
            center.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..n {
                let w = memberships[(i, c)] * memberships[(i, c)];
                weight += w;
                for (s, &x) in center.iter_mut().zip(points.row(i)) {
                    *s += w * x;
                }
            }
            if weight > 0.0 {
                center.iter_mut().for_each(|x| *x /= weight);
            }
        }

        // Memberships inverse-proportional to squared distances.
        let mut max_change: Real = 0.0;
        for i in 0..n {
            let dists: Vec<Real> = centers.iter().map(|c| sq_dist(points.row(i), c)).collect();
            let mut row = vec![0.0; k];
            if let Some(hit) = dists.iter().position(|&d2| d2 == 0.0) {
                // Sitting exactly on a center: full membership there.
                row[hit] = 1.0;
            } else {
                let inv: Vec<Real> = dists.iter().map(|&d2| 1.0 / d2).collect();
                let total: Real = inv.iter().sum();
                for c in 0..k {
                    row[c] = inv[c] / total;
                }
            }
            for c in 0..k {
                let change = abs(row[c] - memberships[(i, c)]);
                if change > max_change {
                    max_change = change;
                }
                memberships[(i, c)] = row[c];
            }
        }
        if max_change < FUZZIFIER_TOL {
            break;
        }
    }
    Ok(memberships)
}

/// Cover built from soft memberships: each node joins its `q` strongest
/// clusters, where `q` is the node's entry in `q_per_row` (ties broken by the
/// lower cluster index). Returns one node list per cluster.
pub fn top_q_cover(memberships: &DenseMatrix, q_per_row: &[usize]) -> Vec<Vec<usize>> {
    assert_eq!(memberships.rows(), q_per_row.len());
    let k = memberships.cols();
    let mut cover = vec![Vec::new(); k];
    for i in 0..memberships.rows() {
        let row = memberships.row(i);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        for &c in order.iter().take(q_per_row[i].min(k)) {
            cover[c].push(i);
        }
    }
    cover
}

/// Ground-truth classes of label rows: argmax per row (single-label rows have
/// exactly one set bit, so this reads it off).
fn hard_classes(labels: &DenseMatrix) -> Vec<usize> {
    (0..labels.rows()).map(|i| argmax(labels.row(i))).collect()
}

/// Ground-truth cover: one community per label, containing the rows with
/// that bit set.
fn label_cover(labels: &DenseMatrix) -> Vec<Vec<usize>> {
    let mut cover = vec![Vec::new(); labels.cols()];
    for i in 0..labels.rows() {
        for (q, community) in cover.iter_mut().enumerate() {
            if labels[(i, q)] != 0.0 {
                community.push(i);
            }
        }
    }
    cover
}

fn label_counts(labels: &DenseMatrix) -> Vec<usize> {
    (0..labels.rows())
        .map(|i| labels.row(i).iter().filter(|&&b| b != 0.0).count())
        .collect()
}

/// Agreement of clustered node embeddings with ground-truth labels.
///
/// Rows of `embeddings` and `labels` are aligned (typically the labeled test
/// nodes). Single-label data is clustered with [`kmeans`] and scored with
/// hard NMI; multi-label data uses [`fuzzy_cmeans`] memberships, keeps each
/// node's top-q clusters (q = its label count), and scores the resulting
/// cover with overlapping NMI.
pub fn nmi_n(
    embeddings: &DenseMatrix,
    labels: &DenseMatrix,
    k: usize,
    seed: u64,
    multi_label: bool,
) -> Result<Real, EvalError> {
    let n = embeddings.rows();
    assert_eq!(n, labels.rows(), "embedding and label rows must align");
    if n == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    if multi_label {
        let memberships = fuzzy_cmeans(embeddings, k, seed)?;
        let cover = top_q_cover(&memberships, &label_counts(labels));
        onmi(&cover, &label_cover(labels), n)
    } else {
        let assign = kmeans(embeddings, k, seed)?;
        Ok(nmi(&assign, &hard_classes(labels)))
    }
}

/// Agreement of learned cluster memberships with ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct NmiC {
    /// Score of the relation-averaged membership matrix.
    pub mean: Real,
    /// Score of each relation's own membership matrix.
    pub per_relation: Vec<Real>,
}

/// Scores learned soft cluster assignments (one row-stochastic matrix per
/// relation, rows aligned with `labels`) against ground truth: the
/// relation-averaged memberships and each relation separately.
///
/// Single-label data hardens memberships by argmax (ties to the lower
/// cluster) and uses hard NMI; multi-label data keeps top-q clusters per node
/// and uses overlapping NMI.
pub fn nmi_c(
    assignments: &[DenseMatrix],
    labels: &DenseMatrix,
    multi_label: bool,
) -> Result<NmiC, EvalError> {
    assert!(!assignments.is_empty(), "need at least one relation");
    let n = labels.rows();
    if n == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    let k = assignments[0].cols();
    let mut mean = DenseMatrix::zeros(n, k);
    for h in assignments {
        assert_eq!(h.rows(), n, "assignment rows must align with labels");
        assert_eq!(h.cols(), k, "assignments must share a cluster count");
        mean.add_assign(h);
    }
    mean.scale_assign(1.0 / assignments.len() as Real);

    let score = |memberships: &DenseMatrix| -> Result<Real, EvalError> {
        if multi_label {
            let cover = top_q_cover(memberships, &label_counts(labels));
            onmi(&cover, &label_cover(labels), n)
        } else {
            let hard: Vec<usize> = (0..n).map(|i| argmax(memberships.row(i))).collect();
            Ok(nmi(&hard, &hard_classes(labels)))
        }
    };

    let per_relation = assignments
        .iter()
        .map(|h| score(h))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NmiC {
        mean: score(&mean)?,
        per_relation,
    })
}
