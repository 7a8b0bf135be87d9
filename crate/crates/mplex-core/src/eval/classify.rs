//! Classification quality of predicted label probabilities.

use alloc::vec;
use alloc::vec::Vec;

use super::EvalError;
use crate::math::Real;
use crate::tensor::DenseMatrix;

/// Set of predicted labels for one probability row: the argmax class for
/// single-label data, every class above probability 0.5 for multi-label.
fn predicted(row: &[Real], multi_label: bool) -> Vec<usize> {
    if multi_label {
        row.iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.5)
            .map(|(c, _)| c)
            .collect()
    } else {
        let mut best = 0;
        for (c, &p) in row.iter().enumerate().skip(1) {
            if p > row[best] {
                best = c;
            }
        }
        vec![best]
    }
}

fn truth(row: &[Real], multi_label: bool) -> Vec<usize> {
    let set: Vec<usize> = row
        .iter()
        .enumerate()
        .filter(|(_, &y)| y != 0.0)
        .map(|(c, _)| c)
        .collect();
    if multi_label {
        set
    } else {
        // Single-label rows carry exactly one bit.
        vec![set[0]]
    }
}

/// Micro- and Macro-F1 of predicted probabilities against ground truth, both
/// in percent. Rows of `predictions` and `labels` are aligned (typically the
/// labeled test nodes).
///
/// Micro-F1 pools true/false positives and negatives across classes; for
/// single-label data it equals accuracy. Macro-F1 averages per-class F1 over
/// all classes, counting classes with an undefined score (no support and no
/// predictions) as 0.
pub fn f1_scores(
    predictions: &DenseMatrix,
    labels: &DenseMatrix,
    multi_label: bool,
) -> Result<(Real, Real), EvalError> {
    let n = predictions.rows();
    assert_eq!(n, labels.rows(), "prediction and label rows must align");
    assert_eq!(
        predictions.cols(),
        labels.cols(),
        "prediction and label classes must align"
    );
    if n == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    let q = labels.cols();
    let mut tp = vec![0usize; q];
    let mut fp = vec![0usize; q];
    let mut fn_ = vec![0usize; q];
    for i in 0..n {
        let pred = predicted(predictions.row(i), multi_label);
        let real = truth(labels.row(i), multi_label);
        for &c in &pred {
            if real.contains(&c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for &c in &real {
            if !pred.contains(&c) {
                fn_[c] += 1;
            }
        }
    }

    let f1 = |tp: Real, fp: Real, fn_: Real| -> Real {
        let denom = 2.0 * tp + fp + fn_;
        if denom > 0.0 {
            2.0 * tp / denom
        } else {
            0.0
        }
    };
    let total_tp: usize = tp.iter().sum();
    let total_fp: usize = fp.iter().sum();
    let total_fn: usize = fn_.iter().sum();
    let micro = f1(total_tp as Real, total_fp as Real, total_fn as Real);
    let macro_ = (0..q)
        .map(|c| f1(tp[c] as Real, fp[c] as Real, fn_[c] as Real))
        .sum::<Real>()
        / q as Real;
    Ok((100.0 * micro, 100.0 * macro_))
}
