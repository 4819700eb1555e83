use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::matching::CovariateRule;

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Default cap on the number of assignments the exhaustive oracle may visit.
pub const DEFAULT_ORACLE_BUDGET: u64 = 10_000_000;

/// Comparison operator of a treatment predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }

    fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub(crate) fn apply_num(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Constant on the right-hand side of a predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

/// One comparison `cell <op> value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub op: CmpOp,
    pub value: Literal,
}

impl Condition {
    pub fn new(op: CmpOp, value: Literal) -> Self {
        Self { op, value }
    }
}

/// Splits units into treated, control and excluded by one column.
///
/// Each predicate is a conjunction of [`Condition`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentRule {
    pub column: String,
    pub treated_predicate: Vec<Condition>,
    pub control_predicate: Vec<Condition>,
}

/// Which pair counts a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NSpec {
    Fixed(usize),
    Sweep {
        n_min: usize,
        n_max: usize,
        step: usize,
    },
    BinarySearch {
        n_min: usize,
        n_max: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub treatment_rule: TreatmentRule,
    pub outcome_column: String,
    pub covariate_rules: Vec<CovariateRule>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_spec: NSpec,
    #[serde(default = "default_budget")]
    pub oracle_budget: u64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_budget() -> u64 {
    DEFAULT_ORACLE_BUDGET
}

fn invalid(field: &'static str, reason: impl Into<String>) -> DataError {
    DataError::InvalidField {
        field,
        reason: reason.into(),
    }
}

impl RunConfig {
    /// Parses a configuration from JSON text and validates it.
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(
                "alpha",
                format!("{} is outside (0, 1)", self.alpha),
            ));
        }
        if self.oracle_budget == 0 {
            return Err(invalid("oracle_budget", "must be positive"));
        }
        if self.covariate_rules.is_empty() {
            return Err(invalid("covariate_rules", "at least one rule is required"));
        }
        if self.outcome_column.is_empty() {
            return Err(invalid("outcome_column", "empty column name"));
        }
        let rule = &self.treatment_rule;
        if rule.treated_predicate.is_empty() {
            return Err(invalid("treatment_rule", "treated_predicate is empty"));
        }
        if rule.control_predicate.is_empty() {
            return Err(invalid("treatment_rule", "control_predicate is empty"));
        }
        for cond in rule.treated_predicate.iter().chain(&rule.control_predicate) {
            if let Literal::Text(text) = &cond.value {
                if cond.op.is_ordering() {
                    return Err(invalid(
                        "treatment_rule",
                        format!("`{}` cannot compare against text `{text}`", cond.op),
                    ));
                }
            }
        }
        match self.n_spec {
            NSpec::Fixed(n) if n < 2 => Err(invalid("n_spec", format!("n = {n} is below 2"))),
            NSpec::Sweep { n_min, n_max, step } => {
                if n_min < 2 {
                    Err(invalid("n_spec", format!("n_min = {n_min} is below 2")))
                } else if n_min > n_max {
                    Err(invalid(
                        "n_spec",
                        format!("n_min = {n_min} exceeds n_max = {n_max}"),
                    ))
                } else if step == 0 {
                    Err(invalid("n_spec", "step must be positive"))
                } else {
                    Ok(())
                }
            }
            NSpec::BinarySearch { n_min, n_max } => {
                if n_min < 2 {
                    Err(invalid("n_spec", format!("n_min = {n_min} is below 2")))
                } else if n_min > n_max {
                    Err(invalid(
                        "n_spec",
                        format!("n_min = {n_min} exceeds n_max = {n_max}"),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Reads and validates a JSON run configuration.
///
/// A relative `data_path` is resolved against the directory holding the
/// configuration file.
pub fn load_config(json_path: impl AsRef<Path>) -> Result<RunConfig, DataError> {
    let path = json_path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = RunConfig::from_json(&text)?;
    if config.data_path.is_relative() {
        if let Some(dir) = path.parent() {
            config.data_path = dir.join(&config.data_path);
        }
    }
    Ok(config)
}
