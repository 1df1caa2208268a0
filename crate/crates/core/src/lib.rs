//! Simulation and analytics for a birth-death process of types ranked by
//! fitness.
//!
//! Types are born at rate `n * lambda` with i.i.d. uniform fitness; while at
//! least two are alive, the least fit dies at rate `n`. The fittest type ever
//! born is therefore immortal, and the question is how long it stays on top:
//! the probability that the record holders at `alpha t` and `t` coincide
//! tends to `alpha` for `lambda <= 1` and to 0 for `lambda > 1`.
//!
//! - [`population`]: exact event-driven simulation.
//! - [`tree`]: phylogenies over types and Newick export.
//! - [`renewal`]: first-passage moment tables, the critical hitting law and
//!   the reflected walk behind per-cycle birth counts.
//! - [`experiments`]: persistence estimators and scaling diagnostics.

pub mod error;
pub mod experiments;
pub mod population;
pub mod renewal;
pub mod seed;
pub mod stats;
pub mod tree;

pub use error::{Cap, Error, Result};
pub use experiments::{Estimator, PersistenceEstimate, PersistenceParams, ScalingDiagnostic};
pub use population::{
    simulate, EventKind, EventLog, PopulationState, SimConfig, Simulator, Trajectory, TypeRecord,
};
pub use renewal::{MomentTable, ReflectedWalkSample};
pub use tree::{AttachmentRule, PhyloTree};
