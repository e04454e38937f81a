//! Decentralized multi-objective optimization by priority consensus.
//!
//! Each agent holds a private objective and a private view of how much every
//! agent's objective should count. Agents average those views with their
//! neighbours while running projected gradient steps on a mixed estimate,
//! and in the limit all of them agree on the minimizer of the consensus
//! weighted sum over a box.

// `!(x > 0.0)` is used on purpose so NaN falls into the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod consensus;
pub mod error;
pub mod graph;
pub mod mixing;
pub mod optimizer;
pub mod pareto;
pub mod problems;

#[cfg(test)]
mod testutil;

pub use bounds::{disagreement_bound, optimality_bound, BoundParams};
pub use consensus::PriorityState;
pub use error::{Error, Result};
pub use graph::Graph;
pub use mixing::{build_mixing_matrix, geometric_params, transition_product, MixingMatrix};
pub use optimizer::{
    algorithm_step, run_trace, BoxConstraint, GradientAt, RunSetup, StepSchedule, SwarmState, Trace,
};
pub use pareto::{pareto_filter, sweep, SweepPoint};
pub use problems::{generate_quadratic, weighted_optimum, OracleSolution, QuadraticProblem};
