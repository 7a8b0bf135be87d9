//! File formats, run directories, and the command-line front end for the
//! multiplex representation-learning core.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod report;
pub mod rundir;
