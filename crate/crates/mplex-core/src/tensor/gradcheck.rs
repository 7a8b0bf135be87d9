//! Central finite-difference verification of tape gradients.

use alloc::vec::Vec;

use crate::math::{self, Real};

use super::DenseMatrix;

/// Outcome of a [`grad_check`] sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all checked entries.
    pub max_rel_err: Real,
    /// `(parameter, row, col)` of the worst entry, if any were checked.
    pub worst: Option<(usize, usize, usize)>,
    /// Number of entries checked.
    pub checked: usize,
}

/// Compare `analytic` gradients against central differences of `f`.
///
/// Every entry of every matrix in `params` is perturbed by `±step` in place
/// (and restored), so `f` must be a pure function of the passed slice. The
/// relative error of an entry is `|a - fd| / max(1, |a|, |fd|)`, which reads
/// as an absolute error near zero and a relative one for large gradients.
pub fn grad_check<F>(
    params: &mut [DenseMatrix],
    analytic: &[DenseMatrix],
    step: Real,
    mut f: F,
) -> GradCheckReport
where
    F: FnMut(&[DenseMatrix]) -> Real,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "one gradient matrix per parameter"
    );
    let shapes: Vec<(usize, usize)> = params.iter().map(|p| p.shape()).collect();
    for (k, g) in analytic.iter().enumerate() {
        assert_eq!(g.shape(), shapes[k], "gradient shape mismatch");
    }

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    for k in 0..params.len() {
        let (rows, cols) = shapes[k];
        for i in 0..rows {
            for j in 0..cols {
                let orig = params[k][(i, j)];
                params[k][(i, j)] = orig + step;
                let plus = f(params);
                params[k][(i, j)] = orig - step;
                let minus = f(params);
                params[k][(i, j)] = orig;

                let fd = (plus - minus) / (2.0 * step);
                let a = analytic[k][(i, j)];
                let denom = max3(1.0, math::abs(a), math::abs(fd));
                let rel = math::abs(a - fd) / denom;
                if rel > report.max_rel_err {
                    report.max_rel_err = rel;
                    report.worst = Some((k, i, j));
                }
                report.checked += 1;
            }
        }
    }
    report
}

fn max3(a: Real, b: Real, c: Real) -> Real {
    let m = if a > b { a } else { b };
    if m > c {
        m
    } else {
        c
    }
}
