//! Writes the quadratic coupling programs and the bounded-variance linear
//! program as CPLEX-LP text, with a JSON sidecar mapping variables to pairs.
//!
//! Grammar of the emitted files:
//!
//! ```text
//! \ comment lines
//! Maximize | Minimize
//!  obj: <linear terms> [ + [ <quadratic terms> ] / 2 ]
//! Subject To
//!  row_<i>: <sum of a_i_*> <= 1
//!  col_<j>: <sum of a_*_j> <= 1
//!  card: <sum of all> = n
//!  sign: <sum of effect * a> >= 0 | <= 0      (quadratic models)
//!  var_bound: <sum of effect^2 * a> <= b_l    (linear model)
//! Binary
//!  <every variable>
//! End
//! ```
//!
//! Variables are named `a_<i>_<j>` with 0-based indices and ordered by
//! `(i, j)`. Inside the bracket every coefficient is doubled, as the format
//! divides the bracket by two. `S²` is written out term by term: squared terms
//! as `a ^ 2`, cross terms as `a * b`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::SolveError;
use crate::greedy::{Case, Direction};
use crate::matching::EffectMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)`.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qip,
    Ilp,
}

/// A binary program over one variable per eligible pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub direction: Direction,
    pub case: Option<Case>,
    pub n: usize,
    /// `(i, j)` of each variable.
    pub variables: Vec<(usize, usize)>,
    pub sense: Sense,
    pub linear: Vec<f64>,
    /// `(p, p, c)` squared terms and `(p, q, c)` cross terms with `p < q`,
    /// holding the true (undoubled) coefficients.
    pub quadratic: Vec<(usize, usize, f64)>,
    pub constraints: Vec<Constraint>,
    pub notes: Vec<String>,
}

pub fn variable_name(i: usize, j: usize) -> String {
    format!("a_{i}_{j}")
}

/// The coupling program for one case: `max Q - S²` for min case 1 and max
/// case 2, `max S² - Q` for min case 2 and max case 1, each with the case's
/// sign constraint on `S`.
pub fn export_qip(
    delta: &EffectMatrix,
    n: usize,
    direction: Direction,
    case: Case,
) -> Result<ModelSpec, SolveError> {
    check(delta, n)?;
    let effects = delta.effects();
    // +1 means the objective is Q - S².
    let q_minus_s2 = matches!(
        (direction, case),
        (Direction::Min, Case::Case1) | (Direction::Max, Case::Case2)
    );
    let sign = if q_minus_s2 { 1.0 } else { -1.0 };
    let linear: Vec<f64> = effects.iter().map(|e| sign * e * e).collect();
    let d = effects.len();
    let mut quadratic = Vec::with_capacity(d * (d + 1) / 2);
    for p in 0..d {
        quadratic.push((p, p, -sign * effects[p] * effects[p]));
        for q in p + 1..d {
            quadratic.push((p, q, -sign * 2.0 * effects[p] * effects[q]));
        }
    }
    let mut constraints = assignment_constraints(delta, n);
    constraints.push(Constraint {
        name: "sign".into(),
        terms: effects.iter().copied().enumerate().collect(),
        relation: if case == Case::Case1 {
            Relation::Ge
        } else {
            Relation::Le
        },
        rhs: 0.0,
    });
    Ok(ModelSpec {
        kind: ModelKind::Qip,
        direction,
        case: Some(case),
        n,
        variables: delta.matches().eligible().to_vec(),
        sense: Sense::Maximize,
        linear,
        quadratic,
        constraints,
        notes: vec![format!(
            "objective: {}",
            if q_minus_s2 { "Q - S^2" } else { "S^2 - Q" }
        )],
    })
}

/// The linearised model: optimise `S` subject to `Q <= b_l`.
pub fn export_ilp(
    delta: &EffectMatrix,
    n: usize,
    direction: Direction,
    b_l: f64,
) -> Result<ModelSpec, SolveError> {
    if b_l.is_nan() || b_l <= 0.0 || b_l.is_infinite() {
        return Err(SolveError::NonPositiveBound(b_l));
    }
    check(delta, n)?;
    let effects = delta.effects();
    let mut constraints = assignment_constraints(delta, n);
    constraints.push(Constraint {
        name: "var_bound".into(),
        terms: effects.iter().map(|e| e * e).enumerate().collect(),
        relation: Relation::Le,
        rhs: b_l,
    });
    let mut notes = vec![
        "objective: S; bounded by Q <= b_l".to_string(),
        "the model is infeasible whenever b_l is below the n smallest squared effects combined"
            .to_string(),
    ];
    let min_sq = effects.iter().map(|e| e * e).fold(f64::INFINITY, f64::min);
    if b_l < min_sq {
        notes.push(format!(
            "b_l = {b_l} is below the smallest squared effect {min_sq}: infeasible"
        ));
    }
    Ok(ModelSpec {
        kind: ModelKind::Ilp,
        direction,
        case: None,
        n,
        variables: delta.matches().eligible().to_vec(),
        sense: match direction {
            Direction::Min => Sense::Minimize,
            Direction::Max => Sense::Maximize,
        },
        linear: effects.to_vec(),
        quadratic: Vec::new(),
        constraints,
        notes,
    })
}

fn check(delta: &EffectMatrix, n: usize) -> Result<(), SolveError> {
    if n < 2 {
        return Err(SolveError::TooFewPairs(n));
    }
    if delta.is_empty() {
        return Err(SolveError::EmptyEligibility);
    }
    Ok(())
}

/// Row and column at-most-one constraints for every unit with a variable,
/// and the cardinality constraint.
fn assignment_constraints(delta: &EffectMatrix, n: usize) -> Vec<Constraint> {
    let pairs = delta.matches().eligible();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); delta.n_treated()];
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); delta.n_control()];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        rows[i].push((p, 1.0));
        cols[j].push((p, 1.0));
    }
    let at_most_one = |prefix: &str, k: usize, terms: Vec<(usize, f64)>| Constraint {
        name: format!("{prefix}_{k}"),
        terms,
        relation: Relation::Le,
        rhs: 1.0,
    };
    let mut out: Vec<Constraint> = Vec::new();
    out.extend(
        rows.into_iter()
            .enumerate()
            .filter(|r| !r.1.is_empty())
            .map(|(i, t)| at_most_one("row", i, t)),
    );
    out.extend(
        cols.into_iter()
            .enumerate()
            .filter(|c| !c.1.is_empty())
            .map(|(j, t)| at_most_one("col", j, t)),
    );
    out.push(Constraint {
        name: "card".into(),
        terms: (0..pairs.len()).map(|p| (p, 1.0)).collect(),
        relation: Relation::Eq,
        rhs: n as f64,
    });
    out
}

impl ModelSpec {
    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_cross_terms(&self) -> usize {
        self.quadratic.iter().filter(|t| t.0 != t.1).count()
    }

    /// Objective value at a 0/1 vector.
    pub fn evaluate_objective(&self, x: &[bool]) -> f64 {
        let lin: f64 = self
            .linear
            .iter()
            .zip(x)
            .filter(|(_, &on)| on)
            .map(|(c, _)| c)
            .sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .filter(|&&(p, q, _)| x[p] && x[q])
            .map(|t| t.2)
            .sum();
        lin + quad
    }

    /// Whether every constraint holds at `x`.
    pub fn satisfies(&self, x: &[bool]) -> bool {
        self.constraints.iter().all(|c| {
            let lhs: f64 = c.terms.iter().filter(|t| x[t.0]).map(|t| t.1).sum();
            c.relation.holds(lhs, c.rhs)
        })
    }

    /// 0/1 vector for a set of `(i, j)` pairs; `None` if a pair has no variable.
    pub fn indicator(&self, pairs: &[(usize, usize)]) -> Option<Vec<bool>> {
        let mut x = vec![false; self.variables.len()];
        for pair in pairs {
            x[self.variables.binary_search(pair).ok()?] = true;
        }
        Some(x)
    }

    pub fn to_lp(&self) -> String {
        let names: Vec<String> = self
            .variables
            .iter()
            .map(|&(i, j)| variable_name(i, j))
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "\\ {} model, direction {}, n = {}",
            match self.kind {
                ModelKind::Qip => "quadratic coupling",
                ModelKind::Ilp => "bounded-variance linear",
            },
            self.direction.as_str(),
            self.n
        );
        if let Some(case) = self.case {
            let _ = writeln!(out, "\\ case {}", if case == Case::Case1 { 1 } else { 2 });
        }
        for note in &self.notes {
            let _ = writeln!(out, "\\ {note}");
        }
        out.push_str(match self.sense {
            Sense::Maximize => "Maximize\n",
            Sense::Minimize => "Minimize\n",
        });
        out.push_str(" obj:");
        for (p, &c) in self.linear.iter().enumerate() {
            push_term(&mut out, c, &names[p]);
        }
        if !self.quadratic.is_empty() {
            out.push_str(" + [");
            for &(p, q, c) in &self.quadratic {
                let var = if p == q {
                    format!("{} ^ 2", names[p])
                } else {
                    format!("{} * {}", names[p], names[q])
                };
                push_term(&mut out, 2.0 * c, &var);
            }
            out.push_str(" ] / 2");
        }
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            for &(p, coef) in &c.terms {
                push_term(&mut out, coef, &names[p]);
            }
            let _ = writeln!(out, " {} {}", c.relation.symbol(), c.rhs);
        }
        out.push_str("Binary\n");
        for name in &names {
            let _ = writeln!(out, " {name}");
        }
        out.push_str("End\n");
        out
    }

    /// Sidecar describing the variable map and the model's parameters.
    pub fn sidecar(&self, treated_ids: &[String], control_ids: &[String]) -> serde_json::Value {
        let variables: Vec<serde_json::Value> = self
            .variables
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| {
                serde_json::json!({
                    "index": p,
                    "name": variable_name(i, j),
                    "treated": i,
                    "control": j,
                    "treated_id": treated_ids.get(i),
                    "control_id": control_ids.get(j),
                })
            })
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "direction": self.direction,
            "case": self.case,
            "n": self.n,
            "n_variables": self.n_variables(),
            "n_cross_terms": self.n_cross_terms(),
            "n_constraints": self.constraints.len(),
            "notes": self.notes,
            "variables": variables,
        })
    }
}

fn push_term(out: &mut String, coef: f64, var: &str) {
    if coef < 0.0 || (coef == 0.0 && coef.is_sign_negative()) {
        let _ = write!(out, " - {} {var}", -coef);
    } else {
        let _ = write!(out, " + {coef} {var}");
    }
}

/// Reads `name value` lines (blank lines and lines starting with `#` or `\`
/// skipped) into a 0/1 vector over the model's variables. Values are rounded.
pub fn import_solution(spec: &ModelSpec, text: &str) -> Result<Vec<bool>, SolveError> {
    let mut x = vec![false; spec.variables.len()];
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let bad = || SolveError::BadSolutionLine(k + 1, line.to_string());
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let value: f64 = value.parse().map_err(|_| bad())?;
        let p = parse_name(name)
            .and_then(|pair| spec.variables.binary_search(&pair).ok())
            .ok_or_else(bad)?;
        x[p] = value.round() == 1.0;
    }
    Ok(x)
}

fn parse_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("a_")?;
    let (i, j) = rest.split_once('_')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistic::PairStats;

    fn full() -> EffectMatrix {
        EffectMatrix::from_dense(&[vec![4.0, 3.0], vec![2.0, 1.0]]).unwrap()
    }

    #[test]
    fn structural_counts() {
        let m = export_qip(&full(), 2, Direction::Min, Case::Case1).unwrap();
        assert_eq!(m.n_variables(), 4);
        assert_eq!(m.n_cross_terms(), 6);
        let rows = m
            .constraints
            .iter()
            .filter(|c| c.name.starts_with("row"))
            .count();
        let cols = m
            .constraints
            .iter()
            .filter(|c| c.name.starts_with("col"))
            .count();
        assert_eq!((rows, cols), (2, 2));
        assert_eq!(m.constraints.iter().filter(|c| c.name == "card").count(), 1);
        assert_eq!(m.constraints.iter().filter(|c| c.name == "sign").count(), 1);
    }

    #[test]
    fn case2_objective_negates_case1() {
        let a = export_qip(&full(), 2, Direction::Min, Case::Case1).unwrap();
        let b = export_qip(&full(), 2, Direction::Min, Case::Case2).unwrap();
        assert!(a.linear.iter().zip(&b.linear).all(|(x, y)| *x == -*y));
        assert!(a
            .quadratic
            .iter()
            .zip(&b.quadratic)
            .all(|(x, y)| x.2 == -y.2));
    }

    #[test]
    fn max_case1_mirrors_min_case2_text() {
        let a = export_qip(&full(), 2, Direction::Max, Case::Case1).unwrap();
        let b = export_qip(&full(), 2, Direction::Min, Case::Case2).unwrap();
        assert_eq!(a.linear, b.linear);
        assert_eq!(a.quadratic, b.quadratic);
        let body = |m: &ModelSpec| {
            m.to_lp()
                .lines()
                .filter(|l| !l.starts_with('\\'))
                .map(str::to_string)
                .collect::<Vec<_>>()
        };
        let (ta, tb) = (body(&a), body(&b));
        let diff: Vec<_> = ta.iter().zip(&tb).filter(|(x, y)| x != y).collect();
        assert_eq!(diff.len(), 1);
        assert!(diff[0].0.starts_with(" sign:") && diff[0].0.ends_with(">= 0"));
        assert!(diff[0].1.ends_with("<= 0"));
    }

    #[test]
    fn objective_round_trip() {
        let d = EffectMatrix::from_dense(&[vec![-1.5, 2.0, 0.25], vec![3.0, -0.5, 1.0]]).unwrap();
        let m = export_qip(&d, 2, Direction::Min, Case::Case1).unwrap();
        let x = m.indicator(&[(0, 0), (1, 2)]).unwrap();
        let s = PairStats::from_effects(&[-1.5, 1.0]);
        assert!((m.evaluate_objective(&x) - (s.sum_sq - s.sum * s.sum)).abs() < 1e-12);
        assert!(m.satisfies(&m.indicator(&[(0, 1), (1, 0)]).unwrap()));
        assert!(!m.satisfies(&m.indicator(&[(0, 0), (0, 1)]).unwrap()));
    }

    #[test]
    fn lp_text_shape() {
        let text = export_qip(&full(), 2, Direction::Min, Case::Case1)
            .unwrap()
            .to_lp();
        assert!(text.contains("Maximize\n obj: + 16 a_0_0 + 9 a_0_1 + 4 a_1_0 + 1 a_1_1 + [ - 32 a_0_0 ^ 2 - 48 a_0_0 * a_0_1"));
        assert!(text.contains(" card: + 1 a_0_0 + 1 a_0_1 + 1 a_1_0 + 1 a_1_1 = 2\n"));
        assert!(text.contains(" sign: + 4 a_0_0 + 3 a_0_1 + 2 a_1_0 + 1 a_1_1 >= 0\n"));
        assert!(text.ends_with("Binary\n a_0_0\n a_0_1\n a_1_0\n a_1_1\nEnd\n"));
    }

    #[test]
    fn ilp_model() {
        let m = export_ilp(&full(), 2, Direction::Max, 100.0).unwrap();
        assert_eq!(m.linear.len(), 4);
        assert!(m.quadratic.is_empty());
        assert!(!m.to_lp().contains('['));
        let tight = export_ilp(&full(), 2, Direction::Min, 0.5).unwrap();
        assert!(tight.notes.iter().any(|n| n.contains("infeasible")));
        assert_eq!(
            export_ilp(&full(), 2, Direction::Min, 0.0),
            Err(SolveError::NonPositiveBound(0.0))
        );
    }

    #[test]
    fn empty_delta_rejected() {
        let d = EffectMatrix::from_triplets(1, 1, []).unwrap();
        assert_eq!(
            export_qip(&d, 2, Direction::Min, Case::Case1),
            Err(SolveError::EmptyEligibility)
        );
    }

    #[test]
    fn solution_import() {
        let m = export_qip(&full(), 2, Direction::Min, Case::Case1).unwrap();
        let x = import_solution(&m, "# sol\na_0_1 1\na_1_0 0.9999999\na_0_0 0\n").unwrap();
        assert_eq!(x, vec![false, true, true, false]);
        assert!(import_solution(&m, "a_9_9 1").is_err());
        assert!(import_solution(&m, "a_0_0").is_err());
    }
}
