//! One-step ahead sequential Super Learner for short panels of many weakly
//! dependent units.
//!
//! The crate is `no_std` (with `alloc`) and holds the numerical pieces:
//!
//! * [`data`], [`graph`], [`loss`], [`ledger`]: observations, dependency graphs,
//!   the indicator least-squares loss and cumulative empirical risks.
//! * [`learners`]: base learners refit at every time step, with honest
//!   snapshots for one-step-ahead scoring.
//! * [`ensemble`]: discrete selection, simplex aggregation, NNLS and the
//!   overarching learner built on top of several meta-learning methods.
//! * [`bounds`]: the constants and right-hand sides of the oracle inequalities
//!   and concentration bounds.
//! * [`simulator`]: a data-generating process with a clique (or lattice)
//!   dependency graph, known regression function and oracle risks.
//!
//! IO, configuration and the Monte Carlo harness live in the `seqsl` crate.
#![no_std]
#![deny(unsafe_code)]
// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod data;
pub mod ensemble;
mod error;
pub mod graph;
pub mod learners;
pub mod ledger;
mod linalg;
pub mod loss;
pub mod seed;
pub mod simulator;

pub use error::{Error, Result};
