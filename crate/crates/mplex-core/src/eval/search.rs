//! Label-based retrieval quality of the embedding space.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::EvalError;
use crate::math::{sqrt, Real};
use crate::tensor::DenseMatrix;

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Label agreement between two nodes: same argmax class (0 or 1) for
/// single-label data, Jaccard overlap of label sets for multi-label.
fn relevance(a: &[Real], b: &[Real], multi_label: bool) -> Real {
    if multi_label {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&x, &y) in a.iter().zip(b.iter()) {
            let (x, y) = (x != 0.0, y != 0.0);
            inter += (x && y) as usize;
            union += (x || y) as usize;
        }
        if union > 0 {
            inter as Real / union as Real
        } else {
            0.0
        }
    } else {
        let argmax = |row: &[Real]| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        };
        (argmax(a) == argmax(b)) as usize as Real
    }
}

/// Mean retrieval precision of cosine-nearest neighbours at each depth in
/// `ks`.
///
/// Every node in `nodes` queries the others; candidates are ranked by cosine
/// similarity (ties broken by the lower node id) and scored by label
/// agreement with the query. Depths larger than the candidate pool use all
/// candidates. A node with a zero-norm embedding makes cosine similarity
/// undefined and is reported as an error.
pub fn similarity_search(
    embeddings: &DenseMatrix,
    labels: &DenseMatrix,
    nodes: &[usize],
    ks: &[usize],
    multi_label: bool,
) -> Result<BTreeMap<usize, Real>, EvalError> {
    if nodes.len() < 2 {
        return Err(EvalError::EmptyTestSet);
    }
    let norms: Vec<Real> = nodes
        .iter()
        .map(|&v| {
            let n = sqrt(dot(embeddings.row(v), embeddings.row(v)));
            if n == 0.0 {
                Err(EvalError::ZeroNormEmbedding { node: v })
            } else {
                Ok(n)
            }
        })
        .collect::<Result<_, _>>()?;

    let mut sums: BTreeMap<usize, Real> = ks.iter().map(|&k| (k, 0.0)).collect();
    for (qi, &query) in nodes.iter().enumerate() {
        let mut ranked: Vec<(usize, Real)> = Vec::with_capacity(nodes.len() - 1);
        for (ci, &cand) in nodes.iter().enumerate() {
            if ci == qi {
                continue;
            }
            let cos = dot(embeddings.row(query), embeddings.row(cand)) / (norms[qi] * norms[ci]);
            ranked.push((cand, cos));
        }
        ranked.sort_by(|(ida, sa), (idb, sb)| sb.partial_cmp(sa).unwrap().then(ida.cmp(idb)));
        let gains: Vec<Real> = ranked
            .iter()
            .map(|&(cand, _)| relevance(labels.row(query), labels.row(cand), multi_label))
            .collect();
        for (&k, sum) in sums.iter_mut() {
            let depth = k.min(gains.len());
            *sum += gains[..depth].iter().sum::<Real>() / depth as Real;
        }
    }
    let queries = nodes.len() as Real;
    Ok(sums.into_iter().map(|(k, s)| (k, s / queries)).collect())
}
