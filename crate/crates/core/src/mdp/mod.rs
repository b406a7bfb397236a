//! Finite MDPs with terminal pairs, their solvers, and the bad-set modification.

mod dagger;
mod model;
mod solve;
pub mod text;
pub mod theory;

pub use dagger::{check_equivalence, make_dagger, policy_preservation, EquivalenceReport, PolicyPreservation};
pub use model::{BadSet, MdpBuilder, Pair, PolicyTable, TabularMdp};
pub use solve::{
    all_policies, optimal_policies, optimal_policies_exhaustive, pessimal_q, policy_evaluation,
    q_values, value_iteration, OptimalPolicySet, QTable, ValueIteration, ENUMERATION_LIMIT,
    TIE_TOLERANCE, VALUE_TOLERANCE,
};
