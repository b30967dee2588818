//! Benchmark harness for the conex solvers: config parsing, experiment
//! orchestration with deterministic CSV output, and the acceptance suite.

// validation guards are written `!(x > 0.0)` so NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod runner;
