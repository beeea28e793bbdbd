//! Gaussian random sums on rooted trees.
//!
//! A weighted rooted tree carries the centered Gaussian field
//!
//! ```text
//! X_t = sigma(t) * sum over ancestors v of t (root included) of alpha(v) * xi_v
//! ```
//!
//! with independent standard normals `xi_v`. This crate provides the tree
//! arithmetic ([`tree`]), the two natural (semi)metrics attached to the field
//! ([`metrics`]), covering-number machinery with certified lower and upper
//! bounds ([`entropy`]), a deterministic counter-based simulator for
//! `E sup |X_t|` ([`sim`]), and sequence criteria that classify boundedness on
//! homogeneously weighted binary trees ([`criteria`]).

pub mod criteria;
pub mod entropy;
mod error;
pub mod metrics;
pub mod rng;
pub mod sim;
pub mod tree;
pub mod weights;

pub use error::Error;
pub use tree::{NodeRef, Tree, TreeSpec};
pub use weights::{LevelSeq, WeightSystem};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
