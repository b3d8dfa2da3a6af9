//! Distributed submodular maximization by Jacobi-style projected stochastic
//! gradient ascent on the multi-linear extension.
//!
//! Every agent owns a probability distribution over its finite strategy set.
//! Agents exchange sampled strategies, estimate the gradient of the
//! multi-linear extension from those samples and take a projected step on
//! the probability simplex. Fixed points of the iteration that sit on simplex
//! vertices are exactly the equilibria of the discrete problem, and every such
//! equilibrium is at least half as good as the optimum.
//!
//! Module map:
//!
//! * [`objective`]: strategy profiles, the objective oracle trait, the
//!   coverage objective and exhaustive property checkers.
//! * [`multilinear`]: exact extension value, exact and sampled gradients.
//! * [`simplex`]: Euclidean projection onto the probability simplex.
//! * [`optimizer`]: the synchronous iteration and equilibrium detection.
//! * [`network`]: the delayed-communication variant over graph topologies.
//! * [`baselines`]: greedy, brute force and equilibrium enumeration.
//! * [`ingest`]: rating-file ingestion and synthetic instances.
//! * [`instance`]: the line-oriented instance and topology file formats.

pub mod baselines;
pub mod error;
pub mod ingest;
pub mod instance;
pub mod multilinear;
pub mod network;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod simplex;
pub mod trace;

pub use error::{Error, Result};
pub use multilinear::ProbabilityProfile;
pub use objective::{Choice, CoverageObjective, Objective, StrategyProfile};
pub use optimizer::{RunConfig, RunOutcome};

/// Default cap on oracle calls for exhaustive routines.
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1_000_000;
