//! Learning query-indexed rankers from partial preference data.
//!
//! Judgments (adjacency graphs, pairwise comparisons, click sessions) are
//! aggregated into structures, ranking losses and convex surrogates are
//! evaluated on those structures, and linear scorers are fit by minimizing a
//! U-statistic empirical risk with proximal stochastic gradient steps. The
//! [`lab`] module checks consistency and inconsistency of surrogates on small
//! finite instances by brute force.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod aggregation;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod lab;
pub mod letor;
pub mod losses;
pub mod optimizer;
pub mod risk;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
