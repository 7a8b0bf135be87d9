//! Partition and cover agreement scores.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::EvalError;
use crate::math::{ln, Real};

fn plogp(p: Real) -> Real {
    if p > 0.0 {
        -p * ln(p)
    } else {
        0.0
    }
}

/// Normalized mutual information between two hard partitions of the same
/// nodes, with arithmetic-mean normalization.
///
/// Returns a value in `[0, 1]`. Two single-cluster partitions carry no
/// information but agree perfectly, so that degenerate pair scores 1;
/// a single-cluster partition against a non-trivial one scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Real {
    assert_eq!(a.len(), b.len(), "partitions must cover the same nodes");
    assert!(!a.is_empty(), "partitions must be nonempty");
    let n = a.len() as Real;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut count_a: BTreeMap<usize, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<usize, usize> = BTreeMap::new();
    for (&ca, &cb) in a.iter().zip(b.iter()) {
        *joint.entry((ca, cb)).or_insert(0) += 1;
        *count_a.entry(ca).or_insert(0) += 1;
        *count_b.entry(cb).or_insert(0) += 1;
    }
    let h_a: Real = count_a.values().map(|&c| plogp(c as Real / n)).sum();
    let h_b: Real = count_b.values().map(|&c| plogp(c as Real / n)).sum();
    if h_a == 0.0 && h_b == 0.0 {
        return 1.0;
    }
    let mut info = 0.0;
    for (&(ca, cb), &c) in &joint {
        let p = c as Real / n;
        let pa = count_a[&ca] as Real / n;
        let pb = count_b[&cb] as Real / n;
        info += p * ln(p / (pa * pb));
    }
    let score = info / (0.5 * (h_a + h_b));
    score.clamp(0.0, 1.0)
}

/// One community as a membership indicator over `universe` nodes.
struct Community {
    member: Vec<bool>,
    size: usize,
}

impl Community {
    fn build(nodes: &[usize], universe: usize) -> Self {
        let mut member = vec![false; universe];
        for &v in nodes {
            assert!(v < universe, "community node {v} outside universe {universe}");
            member[v] = true;
        }
        let size = member.iter().filter(|&&m| m).count();
        Community { member, size }
    }

    /// Entropy of the membership indicator.
    fn entropy(&self, universe: usize) -> Real {
        let p = self.size as Real / universe as Real;
        plogp(p) + plogp(1.0 - p)
    }
}

/// Conditional entropy H(X | Y) of community X's indicator given Y's, or
/// `None` when the pair fails the admissibility constraint
/// h(P11) + h(P00) >= h(P01) + h(P10).
fn conditional_entropy(x: &Community, y: &Community, universe: usize) -> Option<Real> {
    let mut c11 = 0usize;
    let mut c10 = 0usize;
    let mut c01 = 0usize;
    for v in 0..universe {
        match (x.member[v], y.member[v]) {
            (true, true) => c11 += 1,
            (true, false) => c10 += 1,
            (false, true) => c01 += 1,
            (false, false) => {}
        }
    }
    let c00 = universe - c11 - c10 - c01;
    let n = universe as Real;
    let p11 = c11 as Real / n;
    let p10 = c10 as Real / n;
    let p01 = c01 as Real / n;
    let p00 = c00 as Real / n;
    if plogp(p11) + plogp(p00) < plogp(p01) + plogp(p10) {
        return None;
    }
    let h_joint = plogp(p11) + plogp(p10) + plogp(p01) + plogp(p00);
    let h_y = plogp(p11 + p01) + plogp(p10 + p00);
    Some(h_joint - h_y)
}

/// Mean normalized conditional entropy H(A | B) over the communities of `a`.
fn normalized_conditional(a: &[Community], b: &[Community], universe: usize) -> Real {
    let mut sum = 0.0;
    for x in a {
        let h_x = x.entropy(universe);
        let mut best = h_x;
        for y in b {
            if let Some(h) = conditional_entropy(x, y, universe) {
                if h < best {
                    best = h;
                }
            }
        }
        // A constant indicator (empty or all-nodes community) carries no
        // information to recover, so its normalized term saturates at 1.
        sum += if h_x > 0.0 { best / h_x } else { 1.0 };
    }
    sum / a.len() as Real
}

/// Overlapping normalized mutual information between two node covers.
///
/// Each cover is a list of communities (node index sets over `0..universe`);
/// communities may overlap and need not span all nodes. Empty communities are
/// dropped; a cover with no nonempty communities is an error. Matching between
/// communities respects the admissibility constraint: a candidate pair whose
/// indicator agreement is no better than chance is treated as unmatched and
/// contributes the community's full entropy.
pub fn onmi(
    cover_a: &[Vec<usize>],
    cover_b: &[Vec<usize>],
    universe: usize,
) -> Result<Real, EvalError> {
    if universe == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    let a: Vec<Community> = cover_a
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| Community::build(c, universe))
        .collect();
    let b: Vec<Community> = cover_b
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| Community::build(c, universe))
        .collect();
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyCover);
    }
    let h_ab = normalized_conditional(&a, &b, universe);
    let h_ba = normalized_conditional(&b, &a, universe);
    Ok((1.0 - 0.5 * (h_ab + h_ba)).clamp(0.0, 1.0))
}
