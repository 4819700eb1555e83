use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::config::{Condition, Literal, RunConfig};
use crate::error::DataError;

/// A covariate value: numeric when the cell parses as a finite number,
/// categorical otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CovValue {
    Number(f64),
    Category(String),
}

impl CovValue {
    pub fn parse(cell: &str) -> Self {
        let cell = cell.trim();
        match cell.parse::<f64>() {
            Ok(x) if x.is_finite() => CovValue::Number(x),
            _ => CovValue::Category(cell.to_string()),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            CovValue::Number(x) => Some(*x),
            CovValue::Category(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unit {
    /// 1-based data-row number in the source file.
    pub id: String,
    pub covariates: BTreeMap<String, CovValue>,
    pub treated: bool,
    pub outcome: f64,
}

/// Treated and control units retained by the treatment rule, in file order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub units: Vec<Unit>,
    pub covariate_names: Vec<String>,
    /// Data rows matching neither predicate.
    pub excluded: usize,
}

impl Dataset {
    pub fn treated(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(|u| u.treated)
    }

    pub fn control(&self) -> impl Iterator<Item = &Unit> {
        self.units.iter().filter(|u| !u.treated)
    }

    pub fn n_treated(&self) -> usize {
        self.treated().count()
    }

    pub fn n_control(&self) -> usize {
        self.control().count()
    }
}

pub fn load_dataset(csv_path: impl AsRef<Path>, config: &RunConfig) -> Result<Dataset, DataError> {
    let path = csv_path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_dataset_from_reader(file, config)
}

enum Membership {
    Treated,
    Control,
    Excluded,
}

pub fn load_dataset_from_reader<R: Read>(
    reader: R,
    config: &RunConfig,
) -> Result<Dataset, DataError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };

    let rule = &config.treatment_rule;
    let treatment_col = column(&rule.column)?;
    let outcome_col = column(&config.outcome_column)?;
    let mut covariate_names: Vec<String> = Vec::new();
    for cov in &config.covariate_rules {
        if !covariate_names.contains(&cov.column) {
            covariate_names.push(cov.column.clone());
        }
    }
    let covariate_cols = covariate_names
        .iter()
        .map(|name| column(name))
        .collect::<Result<Vec<_>, _>>()?;

    let mut units = Vec::new();
    let mut excluded = 0usize;
    for (idx, record) in csv.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let cell = |col: usize, name: &str| -> Result<&str, DataError> {
            match record.get(col) {
                Some(value) if !value.is_empty() => Ok(value),
                _ => Err(DataError::MissingValue {
                    row,
                    column: name.to_string(),
                }),
            }
        };

        let flag = cell(treatment_col, &rule.column)?;
        let is_treated = satisfies(&rule.treated_predicate, flag, row, &rule.column)?;
        let is_control = satisfies(&rule.control_predicate, flag, row, &rule.column)?;
        let membership = match (is_treated, is_control) {
            (true, true) => return Err(DataError::AmbiguousTreatment { row }),
            (true, false) => Membership::Treated,
            (false, true) => Membership::Control,
            (false, false) => Membership::Excluded,
        };
        if let Membership::Excluded = membership {
            excluded += 1;
            continue;
        }

        let raw_outcome = cell(outcome_col, &config.outcome_column)?;
        let outcome: f64 = raw_outcome
            .parse()
            .map_err(|_| DataError::NonNumericOutcome {
                row,
                value: raw_outcome.to_string(),
            })?;
        if !outcome.is_finite() {
            return Err(DataError::NonFiniteOutcome { row });
        }

        let mut covariates = BTreeMap::new();
        for (name, &col) in covariate_names.iter().zip(&covariate_cols) {
            covariates.insert(name.clone(), CovValue::parse(cell(col, name)?));
        }
        units.push(Unit {
            id: row.to_string(),
            covariates,
            treated: matches!(membership, Membership::Treated),
            outcome,
        });
    }

    if !units.iter().any(|u| u.treated) {
        return Err(DataError::EmptyGroup("treated"));
    }
    if !units.iter().any(|u| !u.treated) {
        return Err(DataError::EmptyGroup("control"));
    }
    Ok(Dataset {
        units,
        covariate_names,
        excluded,
    })
}

fn satisfies(
    conjunction: &[Condition],
    cell: &str,
    row: usize,
    column: &str,
) -> Result<bool, DataError> {
    for cond in conjunction {
        let holds = match &cond.value {
            Literal::Number(rhs) => {
                let lhs: f64 = cell.parse().map_err(|_| DataError::NonNumericComparison {
                    row,
                    column: column.to_string(),
                    value: cell.to_string(),
                    op: cond.op.symbol(),
                })?;
                cond.op.apply_num(lhs, *rhs)
            }
            Literal::Text(rhs) => match cond.op {
                super::CmpOp::Eq => cell == rhs,
                super::CmpOp::Ne => cell != rhs,
                op => {
                    return Err(DataError::NonNumericComparison {
                        row,
                        column: column.to_string(),
                        value: rhs.clone(),
                        op: op.symbol(),
                    })
                }
            },
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig::from_json(
            r#"{
                "data_path": "unused.csv",
                "treatment_rule": {
                    "column": "flyash",
                    "treated_predicate": [{"op": ">=", "value": 24.5}],
                    "control_predicate": [{"op": "==", "value": 0}]
                },
                "outcome_column": "strength",
                "covariate_rules": [
                    {"column": "cement", "kind": "caliper", "tolerance": 30},
                    {"column": "mix", "kind": "exact"}
                ],
                "n_spec": {"fixed": 2}
            }"#,
        )
        .unwrap()
    }

    const FOUR_ROWS: &str =
        "flyash,cement,mix,strength\n30,100,a,40.5\n0,110,a,35\n10,120,b,20\n25,90,b,41\n";

    #[test]
    fn predicate_partition_counts() {
        let data = load_dataset_from_reader(FOUR_ROWS.as_bytes(), &config()).unwrap();
        assert_eq!(data.n_treated(), 2);
        assert_eq!(data.n_control(), 1);
        assert_eq!(data.excluded, 1);
        assert_eq!(data.n_treated() + data.n_control() + data.excluded, 4);
        let ids: Vec<_> = data.units.iter().map(|u| u.id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "4"]);
        assert_eq!(
            data.units[0].covariates["mix"],
            CovValue::Category("a".into())
        );
        assert_eq!(data.units[0].covariates["cement"], CovValue::Number(100.0));
    }

    #[test]
    fn missing_outcome_column() {
        let csv = "flyash,cement,mix\n30,100,a\n0,110,a\n";
        let err = load_dataset_from_reader(csv.as_bytes(), &config()).unwrap_err();
        assert!(err.to_string().contains("missing column"), "{err}");
    }

    #[test]
    fn non_numeric_outcome() {
        let csv = "flyash,cement,mix,strength\n30,100,a,strong\n0,110,a,35\n";
        let err = load_dataset_from_reader(csv.as_bytes(), &config()).unwrap_err();
        assert!(
            matches!(err, DataError::NonNumericOutcome { row: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn missing_covariate_value_is_an_error() {
        let csv = "flyash,cement,mix,strength\n30,,a,40\n0,110,a,35\n";
        let err = load_dataset_from_reader(csv.as_bytes(), &config()).unwrap_err();
        assert!(
            matches!(err, DataError::MissingValue { row: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn overlapping_predicates_are_an_error() {
        let mut cfg = config();
        cfg.treatment_rule.control_predicate = vec![Condition::new(
            super::super::CmpOp::Ge,
            Literal::Number(0.0),
        )];
        let err = load_dataset_from_reader(FOUR_ROWS.as_bytes(), &cfg).unwrap_err();
        assert!(
            matches!(err, DataError::AmbiguousTreatment { row: 1 }),
            "{err}"
        );
    }

    #[test]
    fn empty_control_group() {
        let csv = "flyash,cement,mix,strength\n30,100,a,40\n";
        let err = load_dataset_from_reader(csv.as_bytes(), &config()).unwrap_err();
        assert!(matches!(err, DataError::EmptyGroup("control")));
    }

    #[test]
    fn loading_is_deterministic() {
        let a = load_dataset_from_reader(FOUR_ROWS.as_bytes(), &config()).unwrap();
        let b = load_dataset_from_reader(FOUR_ROWS.as_bytes(), &config()).unwrap();
        assert_eq!(a, b);
    }
}
