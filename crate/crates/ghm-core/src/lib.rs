//! Hierarchical mixture model over tags observed in the leaf regions of a
//! geo-tree.
//!
//! Every leaf region draws its tags from a mixture of per-node multinomials
//! along its root path: generic terms come from nodes high in the tree,
//! locally characteristic terms from the leaf itself. The crate provides
//!
//! - [`geotree`]: the region hierarchy, with stable string ids;
//! - [`corpus`]: ingestion of geotagged records into sparse counts,
//!   including region assignment, tag normalization, per-day deduplication
//!   and rare-tag filtering;
//! - [`model`]: EM training of the mixture, posterior level classification,
//!   region uniqueness and cross-city region matching;
//! - [`baselines`]: naive Bayes and hierarchical tf-idf reference
//!   classifiers;
//! - [`synth`]: a seeded generator of labeled synthetic corpora;
//! - [`eval`]: the generate/split/train/score harness comparing all methods.
//!
//! Hot loops (EM, generation, evaluation trials) run on rayon by default;
//! building with `--no-default-features` selects the sequential fallback.
//! Both paths merge partial results in a fixed order, so results are
//! bit-identical for a given seed.

// Config validation writes `!(x > 0.0)` on purpose: it must reject NaN,
// which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod corpus;
pub mod counts;
pub mod error;
pub mod eval;
mod exec;
pub mod geotree;
pub mod model;
mod sampling;
pub mod synth;

pub use counts::{CountMatrix, Vocabulary};
pub use error::{Error, Result};
pub use exec::{init_thread_pool, Execution};
pub use geotree::{GeoTree, NodeId, NodeSpec};
pub use model::{EmConfig, GhmModel};
