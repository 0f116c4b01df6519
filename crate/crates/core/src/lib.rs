//! Anchored sensor network localization by Euclidean distance matrix
//! completion. The pipeline builds a partial EDM from measured distances,
//! restricts the semidefinite relaxation to the minimal face determined by the
//! anchors and any sensor cliques, solves it with a Gauss-Newton primal-dual
//! path-following method and extracts positions from the optimal Gram matrix.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod edm;
pub mod error;
pub mod linalg;
pub mod locate;
pub mod model;
pub mod reduce;
pub mod relax;
pub mod solve;

pub use error::{Error, Result};
