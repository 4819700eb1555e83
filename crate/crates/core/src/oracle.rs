//! Exhaustive enumeration of `n`-pair assignments, for exact extrema on small
//! instances.

use serde::Serialize;

use crate::error::SolveError;
use crate::matching::EffectMatrix;
use crate::statistic::{ext_real, z_statistic, Assignment, PairStats};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    #[serde(with = "ext_real")]
    pub z_max: f64,
    #[serde(with = "ext_real")]
    pub z_min: f64,
    pub argmax: Assignment,
    pub argmin: Assignment,
    pub enumerated: u64,
    pub degenerate_seen: bool,
}

struct Search {
    rows: Vec<Vec<(usize, f64)>>,
    suffix_rows: Vec<usize>,
    n: usize,
    budget: u64,
    used: Vec<bool>,
    path: Vec<(usize, usize)>,
    best: Option<Best>,
    enumerated: u64,
    degenerate_seen: bool,
}

struct Best {
    z_max: f64,
    z_min: f64,
    argmax: Vec<(usize, usize)>,
    argmin: Vec<(usize, usize)>,
}

impl Search {
    /// Rows are visited in increasing order and columns within a row in
    /// increasing order, so pairs (and running sums) follow `(i, j)` order.
    fn go(&mut self, r: usize, sum: f64, sum_sq: f64) -> Result<(), SolveError> {
        let need = self.n - self.path.len();
        if need == 0 {
            return self.visit(sum, sum_sq);
        }
        if r >= self.rows.len() || self.suffix_rows[r] < need {
            return Ok(());
        }
        for k in 0..self.rows[r].len() {
            let (j, e) = self.rows[r][k];
            if self.used[j] {
                continue;
            }
            self.used[j] = true;
            self.path.push((r, j));
            self.go(r + 1, sum + e, sum_sq + e * e)?;
            self.path.pop();
            self.used[j] = false;
        }
        self.go(r + 1, sum, sum_sq)
    }

    fn visit(&mut self, sum: f64, sum_sq: f64) -> Result<(), SolveError> {
        if self.enumerated == self.budget {
            return Err(SolveError::BudgetExceeded(self.budget));
        }
        self.enumerated += 1;
        let stats = PairStats::from_sums(sum, sum_sq, self.n);
        self.degenerate_seen |= stats.degenerate;
        let z = z_statistic(&stats)?;
        match &mut self.best {
            None => {
                self.best = Some(Best {
                    z_max: z,
                    z_min: z,
                    argmax: self.path.clone(),
                    argmin: self.path.clone(),
                })
            }
            Some(b) => {
                if z > b.z_max {
                    b.z_max = z;
                    b.argmax.clone_from(&self.path);
                }
                if z < b.z_min {
                    b.z_min = z;
                    b.argmin.clone_from(&self.path);
                }
            }
        }
        Ok(())
    }
}

/// Exact `max` / `min` of Z over every one-to-one selection of `n` eligible
/// pairs. Fails once more than `budget` assignments would be evaluated.
pub fn enumerate_extrema(
    delta: &EffectMatrix,
    n: usize,
    budget: u64,
) -> Result<OracleResult, SolveError> {
    if n < 2 {
        return Err(SolveError::TooFewPairs(n));
    }
    // Only rows with at least one eligible pair take part.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut row_ids: Vec<usize> = Vec::new();
    for i in 0..delta.n_treated() {
        let row: Vec<(usize, f64)> = delta.iter_row(i).collect();
        if !row.is_empty() {
            rows.push(row);
            row_ids.push(i);
        }
    }
    let mut suffix_rows = vec![0; rows.len() + 1];
    for r in (0..rows.len()).rev() {
        suffix_rows[r] = suffix_rows[r + 1] + 1;
    }
    let mut search = Search {
        rows,
        suffix_rows,
        n,
        budget,
        used: vec![false; delta.n_control()],
        path: Vec::with_capacity(n),
        best: None,
        enumerated: 0,
        degenerate_seen: false,
    };
    search.go(0, 0.0, 0.0)?;
    let best = search.best.ok_or(SolveError::NoAssignment(n))?;
    let relabel = |pairs: Vec<(usize, usize)>| {
        Assignment::new(pairs.into_iter().map(|(r, j)| (row_ids[r], j)).collect())
    };
    Ok(OracleResult {
        z_max: best.z_max,
        z_min: best.z_min,
        argmax: relabel(best.argmax),
        argmin: relabel(best.argmin),
        enumerated: search.enumerated,
        degenerate_seen: search.degenerate_seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> EffectMatrix {
        EffectMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn both_completions() {
        let r = enumerate_extrema(&dense(&[&[4.0, 3.0], &[2.0, 1.0]]), 2, 100).unwrap();
        assert!((r.z_max - 50f64.sqrt()).abs() < 1e-12);
        assert!((r.z_min - 2.357_022_603_955_158).abs() < 1e-12);
        assert_eq!(r.argmax.pairs(), &[(0, 1), (1, 0)]);
        assert_eq!(r.enumerated, 2);
        assert!(!r.degenerate_seen);
    }

    #[test]
    fn degenerate_maximum() {
        let r = enumerate_extrema(&dense(&[&[-1.0, 2.0], &[2.0, 3.0]]), 2, 100).unwrap();
        assert!((r.z_min - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.z_max, f64::INFINITY);
        assert!(r.degenerate_seen);
    }

    #[test]
    fn single_pair_has_no_assignment() {
        let d = EffectMatrix::from_triplets(2, 2, [(0, 0, 1.0)]).unwrap();
        assert_eq!(
            enumerate_extrema(&d, 2, 100),
            Err(SolveError::NoAssignment(2))
        );
    }

    #[test]
    fn factorial_count_and_budget() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| (i * 5 + j) as f64).collect())
            .collect();
        let d = EffectMatrix::from_dense(&rows).unwrap();
        assert_eq!(enumerate_extrema(&d, 5, 1_000).unwrap().enumerated, 120);
        assert_eq!(
            enumerate_extrema(&d, 5, 119),
            Err(SolveError::BudgetExceeded(119))
        );
        assert_eq!(enumerate_extrema(&d, 5, 120).unwrap().enumerated, 120);
    }
}
