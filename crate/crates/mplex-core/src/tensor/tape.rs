//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records one forward computation per training step. Operands are
//! handles ([`DiffValue`]) into the tape's node arena; [`Tape::backward`]
//! replays the recorded operations in reverse and accumulates gradients into
//! every node. Sparse matrices enter only as constants (adjacency kernels,
//! Laplacians, masks) and never receive gradients.

use alloc::{rc::Rc, vec::Vec};

use crate::math::{self, Real};

use super::{DenseMatrix, SparseMatrix, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffValue(usize);

enum Op {
    Leaf,
    Matmul(DiffValue, DiffValue),
    Spmm(Rc<SparseMatrix>, DiffValue),
    Add(DiffValue, DiffValue),
    Sub(DiffValue, DiffValue),
    Scale(DiffValue, Real),
    Hadamard(DiffValue, DiffValue),
    Sigmoid(DiffValue),
    Log(DiffValue),
    /// `slope` is a 1x1 value; gradient flows into both operands.
    Prelu(DiffValue, DiffValue),
    SoftmaxRows(DiffValue),
    Clamp(DiffValue, Real, Real),
    FrobeniusSq(DiffValue),
    Trace(DiffValue),
    ReduceSum(DiffValue),
    RowSum(DiffValue),
    Transpose(DiffValue),
    RowGather(DiffValue, Vec<usize>),
    ConcatCols(Vec<DiffValue>),
    ColSlice(DiffValue, usize),
    /// Scales row `i` of the first operand by entry `i` of the n x 1 second.
    MulCol(DiffValue, DiffValue),
    ColumnMean(DiffValue),
    BroadcastRows(DiffValue),
}

struct Node {
    value: DenseMatrix,
    grad: DenseMatrix,
    op: Op,
}

/// Records a single forward pass; not shareable across concurrent steps.
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    // Non-finite values are allowed to flow through so a diverging training
    // run can be diagnosed from the recorded loss terms instead of aborting.
    fn push(&mut self, value: DenseMatrix, op: Op) -> DiffValue {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node { value, grad, op });
        DiffValue(self.nodes.len() - 1)
    }

    /// Record a differentiable leaf (a parameter or input).
    pub fn leaf(&mut self, value: DenseMatrix) -> DiffValue {
        self.push(value, Op::Leaf)
    }

    /// Record a constant. Constants are ordinary leaves whose gradient the
    /// caller simply never reads.
    pub fn constant(&mut self, value: DenseMatrix) -> DiffValue {
        self.leaf(value)
    }

    pub fn value(&self, v: DiffValue) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`Tape::backward`] output with respect to `v`.
    pub fn grad(&self, v: DiffValue) -> &DenseMatrix {
        &self.nodes[v.0].grad
    }

    /// Value of a 1x1 node as a scalar.
    pub fn scalar(&self, v: DiffValue) -> Real {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar() on non-1x1 value");
        m[(0, 0)]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> TensorError {
        TensorError::ShapeMismatch { op, lhs: a, rhs: b }
    }

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        a: DiffValue,
        b: DiffValue,
        f: impl Fn(Real, Real) -> Real,
        op: Op,
    ) -> Result<DiffValue, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Self::shape_err(op_name, va.shape(), vb.shape()));
        }
        let out = va.zip_map(vb, f);
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: DiffValue, b: DiffValue) -> Result<DiffValue, TensorError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: DiffValue, b: DiffValue) -> Result<DiffValue, TensorError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: DiffValue, b: DiffValue) -> Result<DiffValue, TensorError> {
        self.binary_same_shape("hadamard", a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, a: DiffValue, k: Real) -> DiffValue {
        let out = self.value(a).map(|x| x * k);
        self.push(out, Op::Scale(a, k))
    }

    pub fn matmul(&mut self, a: DiffValue, b: DiffValue) -> Result<DiffValue, TensorError> {
        let out = match self.value(a).matmul(self.value(b)) {
            Ok(m) => m,
            Err(_) => {
                return Err(Self::shape_err(
                    "matmul",
                    self.value(a).shape(),
                    self.value(b).shape(),
                ))
            }
        };
        Ok(self.push(out, Op::Matmul(a, b)))
    }

    /// Constant-sparse times dense; gradient flows into `d` only.
    pub fn spmm(&mut self, s: Rc<SparseMatrix>, d: DiffValue) -> Result<DiffValue, TensorError> {
        let out = match s.mul_dense(self.value(d)) {
            Ok(m) => m,
            Err(_) => return Err(Self::shape_err("spmm", s.shape(), self.value(d).shape())),
        };
        Ok(self.push(out, Op::Spmm(s, d)))
    }

    pub fn sigmoid(&mut self, a: DiffValue) -> DiffValue {
        let out = self.value(a).map(math::sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Natural log; entries must be strictly positive.
    pub fn log(&mut self, a: DiffValue) -> Result<DiffValue, TensorError> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            return Err(TensorError::NonPositiveLog);
        }
        let out = self.value(a).map(math::ln);
        Ok(self.push(out, Op::Log(a)))
    }

    /// Leaky rectifier with a learnable 1x1 slope for the negative side.
    pub fn prelu(&mut self, a: DiffValue, slope: DiffValue) -> Result<DiffValue, TensorError> {
        let s = self.value(slope);
        if s.shape() != (1, 1) {
            return Err(Self::shape_err("prelu", self.value(a).shape(), s.shape()));
        }
        let k = s[(0, 0)];
        let out = self.value(a).map(|x| if x < 0.0 { k * x } else { x });
        Ok(self.push(out, Op::Prelu(a, slope)))
    }

    pub fn softmax_rows(&mut self, a: DiffValue) -> DiffValue {
        let mut out = self.value(a).clone();
        out.softmax_rows_inplace();
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Clamp entries into `[lo, hi]`. The gradient passes only where the
    /// input is strictly inside the interval.
    pub fn clamp(&mut self, a: DiffValue, lo: Real, hi: Real) -> DiffValue {
        let out = self.value(a).map(|x| {
            if x < lo {
                lo
            } else if x > hi {
                hi
            } else {
                x
            }
        });
        self.push(out, Op::Clamp(a, lo, hi))
    }

    /// Sum of squared entries as a 1x1 value.
    pub fn frobenius_sq(&mut self, a: DiffValue) -> DiffValue {
        let s = self.value(a).frobenius_sq();
        self.push(DenseMatrix::from_elem(1, 1, s), Op::FrobeniusSq(a))
    }

    pub fn trace(&mut self, a: DiffValue) -> Result<DiffValue, TensorError> {
        let v = self.value(a);
        if v.rows() != v.cols() {
            return Err(Self::shape_err("trace", v.shape(), v.shape()));
        }
        let t = (0..v.rows()).map(|i| v[(i, i)]).sum();
        Ok(self.push(DenseMatrix::from_elem(1, 1, t), Op::Trace(a)))
    }

    /// Sum of all entries as a 1x1 value.
    pub fn reduce_sum(&mut self, a: DiffValue) -> DiffValue {
        let s = self.value(a).sum();
        self.push(DenseMatrix::from_elem(1, 1, s), Op::ReduceSum(a))
    }

    /// Per-row sums as an n x 1 column.
    pub fn row_sum(&mut self, a: DiffValue) -> DiffValue {
        let v = self.value(a);
        let out = DenseMatrix::from_fn(v.rows(), 1, |i, _| v.row(i).iter().sum());
        self.push(out, Op::RowSum(a))
    }

    pub fn transpose(&mut self, a: DiffValue) -> DiffValue {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Rows of `a` at `indices` (duplicates allowed); backward scatter-adds.
    pub fn row_gather(&mut self, a: DiffValue, indices: &[usize]) -> Result<DiffValue, TensorError> {
        let v = self.value(a);
        for &i in indices {
            if i >= v.rows() {
                return Err(TensorError::IndexOutOfRange {
                    index: i,
                    len: v.rows(),
                });
            }
        }
        let mut out = DenseMatrix::zeros(indices.len(), v.cols());
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).copy_from_slice(v.row(i));
        }
        Ok(self.push(out, Op::RowGather(a, indices.to_vec())))
    }

    /// Horizontal concatenation; all parts must share a row count.
    pub fn concat_cols(&mut self, parts: &[DiffValue]) -> Result<DiffValue, TensorError> {
        assert!(!parts.is_empty(), "concat_cols of zero parts");
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Self::shape_err("concat_cols", (rows, 0), v.shape()));
            }
            cols += v.cols();
        }
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            for i in 0..rows {
                out.row_mut(i)[offset..offset + v.cols()].copy_from_slice(v.row(i));
            }
            offset += v.cols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Column `j` as an n x 1 value.
    pub fn col_slice(&mut self, a: DiffValue, j: usize) -> Result<DiffValue, TensorError> {
        let v = self.value(a);
        if j >= v.cols() {
            return Err(TensorError::IndexOutOfRange {
                index: j,
                len: v.cols(),
            });
        }
        let out = DenseMatrix::from_fn(v.rows(), 1, |i, _| v[(i, j)]);
        Ok(self.push(out, Op::ColSlice(a, j)))
    }

    /// Scale row `i` of `a` by the scalar `c[i, 0]`.
    pub fn mul_col(&mut self, a: DiffValue, c: DiffValue) -> Result<DiffValue, TensorError> {
        let (va, vc) = (self.value(a), self.value(c));
        if vc.shape() != (va.rows(), 1) {
            return Err(Self::shape_err("mul_col", va.shape(), vc.shape()));
        }
        let out = DenseMatrix::from_fn(va.rows(), va.cols(), |i, j| va[(i, j)] * vc[(i, 0)]);
        Ok(self.push(out, Op::MulCol(a, c)))
    }

    /// Column means as a 1 x c row.
    pub fn column_mean(&mut self, a: DiffValue) -> DiffValue {
        let v = self.value(a);
        let n = v.rows() as Real;
        let mut out = DenseMatrix::zeros(1, v.cols());
        for i in 0..v.rows() {
            for (o, &x) in out.row_mut(0).iter_mut().zip(v.row(i).iter()) {
                *o += x;
            }
        }
        out.scale_assign(1.0 / n);
        self.push(out, Op::ColumnMean(a))
    }

    /// Repeat a 1 x c row `rows` times.
    pub fn broadcast_rows(&mut self, a: DiffValue, rows: usize) -> Result<DiffValue, TensorError> {
        let v = self.value(a);
        if v.rows() != 1 {
            return Err(Self::shape_err("broadcast_rows", v.shape(), (1, v.cols())));
        }
        let mut out = DenseMatrix::zeros(rows, v.cols());
        for i in 0..rows {
            out.row_mut(i).copy_from_slice(v.row(0));
        }
        Ok(self.push(out, Op::BroadcastRows(a)))
    }

    /// Backpropagate from a 1x1 output. May be called once per tape.
    pub fn backward(&mut self, out: DiffValue) -> Result<(), TensorError> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        if self.value(out).shape() != (1, 1) {
            return Err(TensorError::NotScalar {
                shape: self.value(out).shape(),
            });
        }
        self.backward_done = true;
        self.nodes[out.0].grad[(0, 0)] = 1.0;

        for idx in (0..=out.0).rev() {
            // Move the gradient out to release the borrow on nodes[idx].
            if self.nodes[idx].grad.data().iter().all(|&g| g == 0.0) {
                continue;
            }
            let gout = core::mem::replace(&mut self.nodes[idx].grad, DenseMatrix::zeros(0, 0));
            self.propagate(idx, &gout);
            self.nodes[idx].grad = gout;
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, gout: &DenseMatrix) {
        // Split borrows: nodes below idx receive gradient contributions.
        let (below, at) = self.nodes.split_at_mut(idx);
        let node = &at[0];
        match &node.op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let ga = gout
                    .matmul(&below[b.0].value.transpose())
                    .expect("backward shapes follow forward shapes");
                let gb = below[a.0]
                    .value
                    .transpose()
                    .matmul(gout)
                    .expect("backward shapes follow forward shapes");
                below[a.0].grad.add_assign(&ga);
                below[b.0].grad.add_assign(&gb);
            }
            Op::Spmm(s, d) => {
                let gd = s
                    .mul_dense_transposed(gout)
                    .expect("backward shapes follow forward shapes");
                below[d.0].grad.add_assign(&gd);
            }
            Op::Add(a, b) => {
                below[a.0].grad.add_assign(gout);
                below[b.0].grad.add_assign(gout);
            }
            Op::Sub(a, b) => {
                below[a.0].grad.add_assign(gout);
                let g = &mut below[b.0].grad;
                for (gv, &go) in g.data_mut().iter_mut().zip(gout.data().iter()) {
                    *gv -= go;
                }
            }
            Op::Scale(a, k) => {
                let g = &mut below[a.0].grad;
                for (gv, &go) in g.data_mut().iter_mut().zip(gout.data().iter()) {
                    *gv += k * go;
                }
            }
            Op::Hadamard(a, b) => {
                let (x, y) = (a.0, b.0);
                for i in 0..gout.data().len() {
                    let go = gout.data()[i];
                    let (va, vb) = (below[x].value.data()[i], below[y].value.data()[i]);
                    below[x].grad.data_mut()[i] += go * vb;
                    below[y].grad.data_mut()[i] += go * va;
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let g = &mut below[a.0].grad;
                for ((gv, &go), &yv) in g
                    .data_mut()
                    .iter_mut()
                    .zip(gout.data().iter())
                    .zip(y.data().iter())
                {
                    *gv += go * yv * (1.0 - yv);
                }
            }
            Op::Log(a) => {
                let x = a.0;
                for i in 0..gout.data().len() {
                    let v = below[x].value.data()[i];
                    below[x].grad.data_mut()[i] += gout.data()[i] / v;
                }
            }
            Op::Prelu(a, slope) => {
                let k = below[slope.0].value[(0, 0)];
                let mut g_slope = 0.0;
                let x = a.0;
                for i in 0..gout.data().len() {
                    let v = below[x].value.data()[i];
                    let go = gout.data()[i];
                    if v < 0.0 {
                        below[x].grad.data_mut()[i] += go * k;
                        g_slope += go * v;
                    } else {
                        below[x].grad.data_mut()[i] += go;
                    }
                }
                below[slope.0].grad[(0, 0)] += g_slope;
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let g = &mut below[a.0].grad;
                for i in 0..y.rows() {
                    let dot: Real = y
                        .row(i)
                        .iter()
                        .zip(gout.row(i).iter())
                        .map(|(&yv, &go)| yv * go)
                        .sum();
                    for ((gv, &yv), &go) in g
                        .row_mut(i)
                        .iter_mut()
                        .zip(y.row(i).iter())
                        .zip(gout.row(i).iter())
                    {
                        *gv += yv * (go - dot);
                    }
                }
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let x = a.0;
                for i in 0..gout.data().len() {
                    let v = below[x].value.data()[i];
                    if v > lo && v < hi {
                        below[x].grad.data_mut()[i] += gout.data()[i];
                    }
                }
            }
            Op::FrobeniusSq(a) => {
                let go = gout[(0, 0)];
                let x = a.0;
                for i in 0..below[x].value.data().len() {
                    let v = below[x].value.data()[i];
                    below[x].grad.data_mut()[i] += 2.0 * v * go;
                }
            }
            Op::Trace(a) => {
                let go = gout[(0, 0)];
                let g = &mut below[a.0].grad;
                for i in 0..g.rows() {
                    g[(i, i)] += go;
                }
            }
            Op::ReduceSum(a) => {
                let go = gout[(0, 0)];
                for gv in below[a.0].grad.data_mut() {
                    *gv += go;
                }
            }
            Op::RowSum(a) => {
                let g = &mut below[a.0].grad;
                for i in 0..g.rows() {
                    let go = gout[(i, 0)];
                    for gv in g.row_mut(i) {
                        *gv += go;
                    }
                }
            }
            Op::Transpose(a) => {
                let gt = gout.transpose();
                below[a.0].grad.add_assign(&gt);
            }
            Op::RowGather(a, indices) => {
                let g = &mut below[a.0].grad;
                for (k, &i) in indices.iter().enumerate() {
                    for (gv, &go) in g.row_mut(i).iter_mut().zip(gout.row(k).iter()) {
                        *gv += go;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts.iter() {
                    let g = &mut below[p.0].grad;
                    let w = g.cols();
                    for i in 0..g.rows() {
                        for (gv, &go) in g.row_mut(i).iter_mut().zip(gout.row(i)[offset..offset + w].iter())
                        {
                            *gv += go;
                        }
                    }
                    offset += w;
                }
            }
            Op::ColSlice(a, j) => {
                let j = *j;
                let g = &mut below[a.0].grad;
                for i in 0..g.rows() {
                    g[(i, j)] += gout[(i, 0)];
                }
            }
            Op::MulCol(a, c) => {
                let (x, y) = (a.0, c.0);
                let rows = gout.rows();
                let cols = gout.cols();
                for i in 0..rows {
                    let ci = below[y].value[(i, 0)];
                    let mut acc = 0.0;
                    for j in 0..cols {
                        let go = gout[(i, j)];
                        below[x].grad[(i, j)] += go * ci;
                        acc += go * below[x].value[(i, j)];
                    }
                    below[y].grad[(i, 0)] += acc;
                }
            }
            Op::ColumnMean(a) => {
                let g = &mut below[a.0].grad;
                let inv = 1.0 / g.rows() as Real;
                for i in 0..g.rows() {
                    for (gv, &go) in g.row_mut(i).iter_mut().zip(gout.row(0).iter()) {
                        *gv += go * inv;
                    }
                }
            }
            Op::BroadcastRows(a) => {
                let g = &mut below[a.0].grad;
                for i in 0..gout.rows() {
                    for (gv, &go) in g.row_mut(0).iter_mut().zip(gout.row(i).iter()) {
                        *gv += go;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_forward_matches_definition() {
        let mut tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_rows(&[&[0.0, 2.0, -2.0]]));
        let y = tape.sigmoid(x);
        assert_relative_eq!(tape.value(y)[(0, 0)], 0.5);
        assert_relative_eq!(
            tape.value(y)[(0, 1)],
            1.0 / (1.0 + (-2.0 as Real).exp()),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            tape.value(y)[(0, 1)] + tape.value(y)[(0, 2)],
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[-5.0, 0.0, 5.0]]));
        let y = tape.softmax_rows(x);
        for i in 0..2 {
            let s: Real = tape.value(y).row(i).iter().sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn prelu_scales_only_negative_side() {
        let mut tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_rows(&[&[-2.0, 3.0]]));
        let slope = tape.leaf(DenseMatrix::from_elem(1, 1, 0.25));
        let y = tape.prelu(x, slope).unwrap();
        assert_relative_eq!(tape.value(y)[(0, 0)], -0.5);
        assert_relative_eq!(tape.value(y)[(0, 1)], 3.0);
    }

    #[test]
    fn concat_then_slice_round_trips() {
        let mut tape = Tape::new();
        let a = tape.leaf(DenseMatrix::from_rows(&[&[1.0], &[2.0]]));
        let b = tape.leaf(DenseMatrix::from_rows(&[&[3.0], &[4.0]]));
        let cc = tape.concat_cols(&[a, b]).unwrap();
        let s0 = tape.col_slice(cc, 0).unwrap();
        let s1 = tape.col_slice(cc, 1).unwrap();
        assert_eq!(tape.value(s0).data(), tape.value(a).data());
        assert_eq!(tape.value(s1).data(), tape.value(b).data());
    }

    #[test]
    fn backward_requires_scalar_and_runs_once() {
        let mut tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 2.0]]));
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NotScalar { shape: (1, 2) })
        ));
        let s = tape.reduce_sum(x);
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(TensorError::BackwardTwice)));
    }

    #[test]
    fn log_rejects_non_positive_entries() {
        let mut tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_rows(&[&[1.0, 0.0]]));
        assert!(matches!(tape.log(x), Err(TensorError::NonPositiveLog)));
    }

    #[test]
    fn matmul_shape_mismatch_is_reported() {
        let mut tape = Tape::new();
        let a = tape.leaf(DenseMatrix::zeros(2, 3));
        let b = tape.leaf(DenseMatrix::zeros(2, 3));
        assert!(matches!(
            tape.matmul(a, b),
            Err(TensorError::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn spmm_matches_densified_product() {
        let s = SparseMatrix::from_triplets(3, 3, &[(0, 1, 2.0), (1, 0, 0.5), (2, 2, 1.5)])
            .unwrap();
        let d = DenseMatrix::from_rows(&[&[1.0, -1.0], &[2.0, 0.5], &[0.0, 3.0]]);
        let dense = s.to_dense().matmul(&d).unwrap();
        let mut tape = Tape::new();
        let dv = tape.leaf(d);
        let y = tape.spmm(Rc::new(s), dv).unwrap();
        assert_eq!(tape.value(y).data(), dense.data());
    }

    /// One expression that routes gradient through every operation; verified
    /// entry by entry against central differences.
    #[test]
    fn every_op_backward_matches_finite_differences() {
        let a0 = DenseMatrix::from_rows(&[
            &[0.3, -0.7, 1.1, 0.2],
            &[-0.4, 0.6, -1.2, 0.8],
            &[0.9, 0.1, 0.5, -0.3],
        ]);
        let b0 = DenseMatrix::from_rows(&[
            &[0.2, -0.5],
            &[0.7, 0.4],
            &[-0.6, 0.3],
            &[0.1, -0.9],
        ]);
        let slope0 = DenseMatrix::from_elem(1, 1, 0.25);
        let sp = Rc::new(
            SparseMatrix::from_triplets(
                3,
                3,
                &[(0, 0, 1.0), (0, 1, 0.5), (1, 1, 1.0), (2, 0, 0.25), (2, 2, 1.0)],
            )
            .unwrap(),
        );

        let build = |ps: &[DenseMatrix], sp: &Rc<SparseMatrix>| -> (Tape, DiffValue) {
            let mut t = Tape::new();
            let a = t.leaf(ps[0].clone());
            let b = t.leaf(ps[1].clone());
            let slope = t.leaf(ps[2].clone());

            let m = t.matmul(a, b).unwrap();
            let s = t.spmm(sp.clone(), m).unwrap();
            let p = t.prelu(s, slope).unwrap();
            let sm = t.softmax_rows(p);
            let cl = t.clamp(sm, 1e-6, 1.0 - 1e-6);
            let lg = t.log(cl).unwrap();
            let h = t.hadamard(lg, sm).unwrap();
            let sg = t.sigmoid(h);
            let tr_in = {
                let tt = t.transpose(sg);
                t.matmul(tt, sg).unwrap()
            };
            let tr = t.trace(tr_in).unwrap();

            let g = t.row_gather(sg, &[2, 0, 1, 0]).unwrap();
            let cc = t.concat_cols(&[g, g]).unwrap();
            let cs = t.col_slice(cc, 1).unwrap();
            let rs = t.row_sum(cc);
            let ad = t.add(cs, rs).unwrap();
            let sb = t.sub(ad, cs).unwrap();
            let mc = t.mul_col(cc, sb).unwrap();
            let cm = t.column_mean(mc);
            let br = t.broadcast_rows(cm, 2).unwrap();
            let fs = t.frobenius_sq(br);
            let rd = t.reduce_sum(mc);

            let fs_s = t.scale(fs, 0.3);
            let tr_s = t.scale(tr, 0.7);
            let part = t.add(fs_s, tr_s).unwrap();
            let total = t.add(part, rd).unwrap();
            (t, total)
        };

        let (mut tape, total) = build(&[a0.clone(), b0.clone(), slope0.clone()], &sp);
        let (av, bv, sv) = (DiffValue(0), DiffValue(1), DiffValue(2));
        tape.backward(total).unwrap();
        let analytic = [
            tape.grad(av).clone(),
            tape.grad(bv).clone(),
            tape.grad(sv).clone(),
        ];

        let mut params = [a0, b0, slope0];
        let report = grad_check(&mut params, &analytic, 1e-6, |ps| {
            let (t, out) = build(ps, &sp);
            t.scalar(out)
        });
        assert_eq!(report.checked, 12 + 8 + 1);
        assert!(
            report.max_rel_err < 1e-7,
            "rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
