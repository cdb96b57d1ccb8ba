//! Personalized federated learning via stacked generalization.
//!
//! Clients train forests on private tabular data, publish them to an
//! in-process federation registry, and personalize by stacking a meta-model
//! on the predictions of fetched models. Contribution scores extracted from
//! the meta-models aggregate into a weighted directed contribution graph.
//! Synthetic non-IID partitioners (quantity skew, label skew, vertical,
//! natural) generate the federations, and a sweep runner drives seeded,
//! reproducible experiments.

pub mod error;
pub mod federation;
pub mod forest;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod runner;
pub mod stacking;
pub mod tabular;

pub use error::{Error, Result};
