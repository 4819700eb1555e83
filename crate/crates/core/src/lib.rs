//! Robust matched-pair Z-tests.
//!
//! Given treated and control units and a set of admissible (treated, control)
//! pairs, the crate bounds the one-sided Z statistic over every way of picking
//! `n` one-to-one pairs. The smallest and largest attainable statistics turn
//! into a P-value interval, and the width of that interval says how much the
//! conclusion depends on the experimenter's choice of pairs.
//!
//! Pipeline: [`data_io`] loads a dataset, [`matching`] derives the eligible
//! pairs and their effects, [`orchestrator`] runs the heuristic case ladder
//! ([`greedy`] and [`assignment`]) and [`statistic`] turns the extremes into a
//! [`TestResult`]. [`oracle`] enumerates small instances exactly and
//! [`export`] writes the quadratic models for external solvers.

pub mod assignment;
pub mod data_io;
pub mod error;
pub mod export;
pub mod greedy;
pub mod matching;
pub mod oracle;
pub mod orchestrator;
pub mod statistic;
pub mod synthetic;

pub use assignment::{case3_test, hungarian_min, CostMatching};
pub use data_io::{load_config, load_dataset, Dataset, NSpec, RunConfig};
pub use error::{DataError, MatchError, SolveError};
pub use greedy::{
    build_sorted_list, greedy_max, greedy_min, Case, CaseTag, Direction, GreedySolution,
    SortedEffectList,
};
pub use matching::{
    build_effect_matrix, build_match_matrix, partition_blocks, BlockPartition, CovariateRule,
    EffectMatrix, MatchMatrix,
};
pub use oracle::{enumerate_extrema, OracleResult};
pub use orchestrator::{
    find_max_feasible_n, run_test, solve, sweep, Solved, Solver, SweepEntry, TestResult,
};
pub use statistic::{
    assignment_stats, classify_robustness, gamma_roots, normal_upper_tail, p_values,
    robustness_margin, z_statistic, Assignment, PairStats, Robustness,
};
