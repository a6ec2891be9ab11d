//! Preference profiles, the voting rules evaluated in the lab, seeded profile
//! samplers, and estimators for how often a voting function satisfies the
//! classic axioms of social choice.
//!
//! Alternatives are 0-based indices everywhere; the letters `a, b, c, …` are
//! only used when pretty-printing.

pub mod axioms;
mod error;
pub mod profile;
pub mod rules;
pub mod sampling;

pub use axioms::{AxiomId, Verdict, VotingFunction};
pub use error::{CoreError, Result};
pub use profile::{
    condorcet_winner, kendall_tau, margin_matrix, permute_alternatives, permute_voters,
    MarginMatrix, Profile, Ranking, WinningSet, MAX_ALTERNATIVES,
};
pub use rules::{apply_rule, RuleId};
pub use sampling::{DistributionKind, DistributionSpec, Rng};
