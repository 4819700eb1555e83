//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading configurations and datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: non-numeric outcome `{value}`")]
    NonNumericOutcome { row: usize, value: String },
    #[error("row {row}: non-finite outcome")]
    NonFiniteOutcome { row: usize },
    #[error(
        "row {row}: value `{value}` in column `{column}` is not numeric but `{op}` needs a number"
    )]
    NonNumericComparison {
        row: usize,
        column: String,
        value: String,
        op: &'static str,
    },
    #[error("row {row}: unit satisfies both the treated and the control predicate")]
    AmbiguousTreatment { row: usize },
    #[error("empty {0} group")]
    EmptyGroup(&'static str),
}

/// Errors raised while building the eligibility structure.
#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("no covariate rules given")]
    NoRules,
    #[error("caliper on categorical column `{column}` (value `{value}`)")]
    CaliperOnCategorical { column: String, value: String },
    #[error("covariate `{0}` not present in dataset")]
    UnknownCovariate(String),
    #[error("negative caliper tolerance {tolerance} on column `{column}`")]
    NegativeTolerance { column: String, tolerance: f64 },
    #[error("pair ({0}, {1}) out of range")]
    IndexOutOfRange(usize, usize),
    #[error("duplicate pair ({0}, {1})")]
    DuplicatePair(usize, usize),
    #[error("non-finite effect at pair ({0}, {1})")]
    NonFiniteEffect(usize, usize),
    #[error("unit id `{0}` does not resolve to a {1} unit")]
    UnknownUnit(String, &'static str),
}

/// Errors raised by the statistic, solver and export layers.
#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("n must be at least 2 (got {0})")]
    TooFewPairs(usize),
    #[error("pair ({0}, {1}) is not an eligible match")]
    IneligiblePair(usize, usize),
    #[error("treated index {0} used twice")]
    DuplicateTreated(usize),
    #[error("control index {0} used twice")]
    DuplicateControl(usize),
    #[error("degenerate statistics (n*Q = S^2): gamma root is infinite")]
    InfiniteRoot,
    #[error("z_min ({z_min}) exceeds z_max ({z_max})")]
    UnorderedZ { z_min: f64, z_max: f64 },
    #[error("alpha must lie in (0, 1) (got {0})")]
    InvalidAlpha(f64),
    #[error("invalid range [{n_min}, {n_max}] step {step}")]
    InvalidRange {
        n_min: usize,
        n_max: usize,
        step: usize,
    },
    #[error("no good matches: the eligibility set is empty")]
    EmptyEligibility,
    #[error("{0} pairs are not possible")]
    NoPairsPossible(usize),
    #[error("no assignment of {0} pairs exists")]
    NoAssignment(usize),
    #[error("enumeration budget of {0} assignments exceeded")]
    BudgetExceeded(u64),
    #[error("ILP bound b_l must be positive (got {0})")]
    NonPositiveBound(f64),
    #[error("solution line {0}: cannot read `{1}`")]
    BadSolutionLine(usize, String),
}
