//! Transaction-rate control for Tangle-style DAG ledgers.
//!
//! A principal that cannot observe agents' computing power assigns each
//! agent type a proof-of-work difficulty and a transaction weight. The
//! assignment must make truthful reporting optimal and guarantee every type
//! a reservation utility. [`outer_search::solve_mechanism`] finds the
//! optimal assignment exactly by enumerating difficulty vectors and solving
//! the linear weight problem for each one. [`tangle_sim`] measures how an
//! assignment affects approval times in a simulated Tangle.

pub mod cli;
pub mod error;
pub mod inner_solver;
pub mod mechanism;
pub mod outer_search;
pub mod tangle_sim;

pub use error::{Error, Result};
pub use inner_solver::{
    brute_force_weights, solve_weights, verify_assignment, InnerResult, VerificationReport,
};
pub use mechanism::{
    build_constraints, cost, fixed_linear_scheme, objective, tx_rate, utility, AgentType,
    AgentTypeSet, Assignment, ConstraintSystem, ConstraintTag, CostModel, DifficultyVector,
    ExpCost, LinearScheme, MechanismConfig, Provenance, WeightVector,
};
pub use outer_search::{
    count_monotone, enumerate_monotone, solve_mechanism, MechanismSolution, SearchMode,
};
pub use tangle_sim::{run, ArrivalModel, SimConfig, SimMetrics, TangleState};
