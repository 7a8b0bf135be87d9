//! Dense and sparse matrices plus a reverse-mode differentiation tape.
//!
//! All learning-facing state lives in [`DenseMatrix`] values recorded on a
//! [`Tape`]; graph structure enters as constant [`SparseMatrix`] operands.
//! Element order is fixed (row-major, ascending column accumulation) so that
//! equal inputs give bitwise-equal outputs on every platform.

mod dense;
mod gradcheck;
mod sparse;
mod tape;

pub use dense::DenseMatrix;
pub use gradcheck::{grad_check, GradCheckReport};
pub use sparse::SparseMatrix;
pub use tape::{DiffValue, Tape};

use core::fmt;

/// Errors raised by tensor construction and tape operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TensorError {
    /// Operand shapes are incompatible for `op`.
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A row, column, or node index is out of range.
    IndexOutOfRange { index: usize, len: usize },
    /// An operation received or produced a NaN or infinity.
    NonFinite { op: &'static str },
    /// Two triplets address the same sparse entry.
    DuplicateEntry { row: usize, col: usize },
    /// Backpropagation requires a 1x1 output node.
    NotScalar { shape: (usize, usize) },
    /// The tape's gradients were already computed.
    BackwardTwice,
    /// Logarithm of a non-positive entry.
    NonPositiveLog,
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { op, lhs, rhs } => write!(
                f,
                "{op}: incompatible shapes {}x{} and {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            TensorError::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            TensorError::NonFinite { op } => write!(f, "{op}: non-finite value"),
            TensorError::DuplicateEntry { row, col } => {
                write!(f, "duplicate sparse entry at ({row}, {col})")
            }
            TensorError::NotScalar { shape } => write!(
                f,
                "backward requires a 1x1 output, got {}x{}",
                shape.0, shape.1
            ),
            TensorError::BackwardTwice => write!(f, "backward already ran on this tape"),
            TensorError::NonPositiveLog => write!(f, "log of a non-positive entry"),
        }
    }
}

impl core::error::Error for TensorError {}
