//! Simulation toolkit for statistical power of matched-pair cluster
//! randomized trials of infections spreading on contact networks.
//!
//! The pipeline follows four stages: generate within-cluster networks
//! ([`netgen`]), rewire each cluster pair to a target between-cluster mixing
//! fraction ([`mixing`]), run a discrete-time SI process ([`epidemic`]), and
//! analyze the resulting trials ([`analysis`]). A mass-action ODE
//! counterpart lives in [`ode`], and [`empirical`] estimates the mixing
//! fraction from observed call data.

pub mod analysis;
pub mod empirical;
pub mod epidemic;
pub mod fixtures;
pub mod graph;
pub mod mixing;
pub mod netgen;
pub mod ode;
pub mod rng;
pub mod stats;
pub mod trial;

pub use analysis::PowerEstimate;
pub use epidemic::{InfectionRecord, Infectivity, SpreadParams};
pub use graph::Network;
pub use mixing::{Arm, ClusterPair};
pub use netgen::{EnsembleKind, EnsembleSpec};
pub use trial::{TrialConfig, TrialOutcome};
