//! Dated phylogenies from binary trait data under a stochastic Dollo model.
//!
//! Traits are born once along the branches of a dated binary tree, copied at
//! branching points, and lost independently along each lineage. The crate
//! evaluates the exact likelihood of observed presence/absence data,
//! samples trees and rates by Markov chain Monte Carlo under calibration
//! constraints, simulates data under the model and under misspecified
//! variants, and summarizes posterior samples.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod mcmc;
pub mod par;
pub mod priors;
pub mod simulate;
pub mod tree;

pub use data::{ObservationModel, Trait, TraitMatrix};
pub use error::{Error, Result};
pub use par::Execution;
pub use tree::{DatedTree, NodeId, Subtree};
