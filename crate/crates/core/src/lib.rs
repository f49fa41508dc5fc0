//! Temporal competitive cascades: simulation, reverse delayed reward sampling
//! and certified seed selection for misinformation mitigation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod fixture;
pub mod graph;
pub mod oracle;
pub mod params;
pub mod rdr;
pub mod select;
pub mod sim;
pub mod stats;
pub mod world;

pub use error::{Error, Result};
pub use graph::{EdgeId, NetGraph, NodeId, ProbMode};
pub use params::ModelParams;
