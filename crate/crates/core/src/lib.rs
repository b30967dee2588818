//! First-order methods for composite optimization with functional
//! constraints.
//!
//! The crate provides:
//!
//! - Bregman geometry kernels (feasible sets, distance generating functions,
//!   a composite prox operator) in [`geometry`];
//! - the composite constrained problem model and desk-scale benchmark
//!   generators in [`problems`];
//! - stochastic first-order oracles with certified bias/variance in
//!   [`oracles`];
//! - the constraint-extrapolation primal-dual solver in [`conex`];
//! - exact and inexact proximal-point outer loops for nonconvex problems in
//!   [`proxpoint`];
//! - independent reference solvers (grid search, analytic KKT triples, a
//!   dual-bisection QCQP solver) in [`mod@reference`];
//! - optimality/feasibility measures and rate-slope fitting in [`metrics`].

// validation guards are written `!(x > 0.0)` so NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conex;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod oracles;
pub mod problems;
pub mod proxpoint;
pub mod reference;

pub use error::{Error, Result};
