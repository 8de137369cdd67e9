//! Failure-probability estimation coupled with weighted traveling repairman
//! routing.
//!
//! A linear scoring model `f(x) = λ·x` is trained on labeled examples and
//! mapped to per-node failure probabilities. A repair crew starting at node 0
//! must visit every node of a complete graph and return; the route cost
//! charges each node by how long it waits. The crate evaluates both cost
//! models, solves the routing subproblem exactly, exports the flow MILP,
//! optimizes the combined objective, checks the stochastic cost models by
//! simulation, and evaluates the generalization bound.

pub mod bound;
pub mod cost;
pub mod error;
pub mod learn;
pub mod math;
pub mod milp;
pub mod opt;
pub mod sim;
pub mod trp;
pub mod types;

pub use error::{Error, Result};
pub use types::{DistanceMatrix, FeatureVector, Label, LabeledDataset, ModelParams, NodeSet, NodeWeights, Route};
