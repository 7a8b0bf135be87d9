//! Semi-supervised representation learning for multiplex networks.
//!
//! A multiplex network is a multi-layer graph in which every layer shares the
//! same node set and each layer carries a distinct relation. This crate learns
//! per-relation node embeddings with graph-convolutional encoders, ties them to
//! cluster-weighted global summaries through a contrastive mutual-information
//! objective, aligns layers via cross-edge and consensus regularization, and
//! predicts labels from a shared consensus embedding.
//!
//! The crate is `no_std` + `alloc`: it contains the numerical core only (dense
//! and sparse matrices, a reverse-mode tape, the model, losses, the trainer,
//! clustering/classification metrics, and a synthetic generator). File formats
//! and the command-line interface live in the companion `mplex` crate.
//!
//! All floating-point transcendentals go through [`libm`], so results are
//! bit-identical across platforms for a fixed seed.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod eval;
pub mod graph;
pub mod math;
pub mod model;
pub mod objective;
pub mod rng;
pub mod synth;
pub mod trainer;
pub mod tensor;

pub use math::Real;
pub use tensor::{DenseMatrix, DiffValue, SparseMatrix, Tape};
