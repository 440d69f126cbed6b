//! Weekly nurse rostering by evolving rule strings.
//!
//! Each nurse is assigned one weekly shift pattern from her contract's
//! feasible set. Instead of searching assignments directly, the solver
//! searches over *rule strings*: one constructive heuristic per nurse,
//! decoded left to right against the running coverage state. A
//! chain-structured probabilistic model is learned from the most promising
//! strings each generation by frequency counting, then sampled to propose
//! the next generation. Undercover staffing is penalized linearly on top
//! of the preference cost; surplus staffing is free.
//!
//! Modules:
//! - [`instance`]: problem data, pattern enumeration, validation.
//! - [`fixture`]: the text format instances are stored in.
//! - [`generate`]: seeded synthetic instances with a planted solution.
//! - [`coverage`]: coverage state and the penalized objective.
//! - [`rules`]: the constructive rules and the rule-string decoder.
//! - [`bayes`]: the chain model, learned by counting, sampled by roulette.
//! - [`solver`]: the generational loop, two random baselines, and
//!   exhaustive oracles for small instances.

pub mod bayes;
pub mod coverage;
pub mod fixture;
pub mod generate;
pub mod instance;
pub mod rules;
pub mod solver;

pub use coverage::{evaluate, is_feasible, CoverageState, FitnessBreakdown, Schedule};
pub use instance::{
    enumerate_patterns, ContractType, Grade, Nurse, SchedulingInstance, ShiftPattern,
};
pub use rules::{decode, RuleId, RuleParams, RuleSet, RuleString};
pub use solver::{
    brute_force_optimum, brute_force_rule_strings, run_boa, run_rd1, run_rd2, BoaConfig,
    RunResult,
};
