//! The case ladder per direction, two-sided test assembly, n-sweeps and the
//! search for the largest matchable `n`.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::{case3_from_matching, first_n_pairs, hungarian_min, CostMatching};
use crate::error::SolveError;
use crate::greedy::{
    build_sorted_list, greedy_max_reflected, greedy_min, Case, CaseTag, Direction, GreedySolution,
    SortedEffectList,
};
use crate::matching::EffectMatrix;
use crate::statistic::{
    classify_robustness, ext_real, p_values, z_statistic, Assignment, PairStats, Robustness,
};

/// A direction's answer plus the cases tried to reach it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solved {
    pub solution: GreedySolution,
    pub trace: Vec<CaseTag>,
}

/// Precomputed state shared by every `n` and both directions: the sorted
/// lists of `Δ` and `-Δ`, and the optimal matchings of each.
pub struct Solver<'a> {
    delta: &'a EffectMatrix,
    list: SortedEffectList,
    negated: SortedEffectList,
    min_matching: CostMatching,
    max_matching: CostMatching,
}

impl<'a> Solver<'a> {
    pub fn new(delta: &'a EffectMatrix) -> Result<Self, SolveError> {
        if delta.is_empty() {
            return Err(SolveError::EmptyEligibility);
        }
        let list = build_sorted_list(delta);
        let negated = list.negated();
        let min_matching = hungarian_min(delta)?;
        let max_matching = hungarian_min(&delta.negated())?;
        Ok(Self {
            delta,
            list,
            negated,
            min_matching,
            max_matching,
        })
    }

    pub fn delta(&self) -> &EffectMatrix {
        self.delta
    }

    /// Size of a maximum matching: the largest `n` any assignment can reach.
    pub fn max_pairs(&self) -> usize {
        self.min_matching.cardinality
    }

    fn matching(&self, direction: Direction) -> &CostMatching {
        match direction {
            Direction::Min => &self.min_matching,
            Direction::Max => &self.max_matching,
        }
    }

    fn quadratic(
        &self,
        n: usize,
        direction: Direction,
        case: Case,
    ) -> Result<Option<GreedySolution>, SolveError> {
        match direction {
            Direction::Min => greedy_min(&self.list, n, case),
            Direction::Max => greedy_max_reflected(&self.negated, n, case),
        }
    }

    /// Runs the ladder (min: case 2, case 3, case 1; max: case 1, case 3,
    /// case 2) and returns the first feasible answer. When every case fails
    /// but `n` pairs can be matched, the case-3 matching is returned as is,
    /// flagged as a fallback.
    pub fn solve(&self, n: usize, direction: Direction) -> Result<Solved, SolveError> {
        if n < 2 {
            return Err(SolveError::TooFewPairs(n));
        }
        if self.max_pairs() < n {
            return Err(SolveError::NoPairsPossible(n));
        }
        let (first, last) = match direction {
            Direction::Min => (Case::Case2, Case::Case1),
            Direction::Max => (Case::Case1, Case::Case2),
        };
        let mut trace = Vec::with_capacity(3);

        trace.push(CaseTag::quadratic(direction, first));
        if let Some(solution) = self.quadratic(n, direction, first)? {
            return Ok(Solved { solution, trace });
        }
        trace.push(CaseTag::linear(direction));
        if let Some(solution) =
            case3_from_matching(self.delta, self.matching(direction), n, direction)?
        {
            return Ok(Solved { solution, trace });
        }
        trace.push(CaseTag::quadratic(direction, last));
        if let Some(solution) = self.quadratic(n, direction, last)? {
            return Ok(Solved { solution, trace });
        }

        let pairs = first_n_pairs(self.delta, self.matching(direction), n, direction)
            .ok_or(SolveError::NoPairsPossible(n))?;
        let assignment = Assignment::new(pairs);
        let stats = PairStats::from_effects(&assignment.effects(self.delta)?);
        let solution = GreedySolution {
            gamma: z_statistic(&stats)?,
            assignment,
            stats,
            case: CaseTag::linear(direction),
            fallback: true,
        };
        Ok(Solved { solution, trace })
    }

    /// Both directions at `n`, turned into P-values and a robustness class.
    pub fn run_test(&self, n: usize, alpha: f64) -> Result<TestResult, SolveError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SolveError::InvalidAlpha(alpha));
        }
        let min = self.solve(n, Direction::Min)?;
        let max = self.solve(n, Direction::Max)?;
        let (mut z_min, mut z_max) = (min.solution.z(), max.solution.z());
        // Both are attained by valid assignments, so the smaller one is the
        // better lower bound regardless of which direction found it.
        let swapped = z_min > z_max;
        if swapped {
            std::mem::swap(&mut z_min, &mut z_max);
        }
        let (p_min, p_max) = p_values(z_max, z_min)?;
        Ok(TestResult {
            n,
            alpha,
            z_min,
            z_max,
            p_min,
            p_max,
            classification: classify_robustness(p_min, p_max, alpha),
            swapped,
            min: DirectionResult::new(min),
            max: DirectionResult::new(max),
        })
    }

    /// One entry per `n` in `n_min..=n_max` by `step`, in ascending order.
    /// Distinct `n` run on the current rayon pool.
    pub fn sweep(
        &self,
        n_min: usize,
        n_max: usize,
        step: usize,
        alpha: f64,
    ) -> Result<Vec<SweepEntry>, SolveError> {
        if n_min < 2 || n_min > n_max || step == 0 {
            return Err(SolveError::InvalidRange { n_min, n_max, step });
        }
        let ns: Vec<usize> = (n_min..=n_max).step_by(step).collect();
        ns.par_iter()
            .map(|&n| {
                let start = Instant::now();
                let result = match self.run_test(n, alpha) {
                    Ok(r) => Some(r),
                    Err(SolveError::NoPairsPossible(_)) => None,
                    Err(e) => return Err(e),
                };
                Ok(SweepEntry {
                    n,
                    result,
                    elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect()
    }

    fn feasible(&self, n: usize, mode: Feasibility) -> Result<bool, SolveError> {
        for direction in [Direction::Min, Direction::Max] {
            match self.solve(n, direction) {
                Ok(s) if mode == Feasibility::LadderOnly && s.solution.fallback => {
                    return Ok(false)
                }
                Ok(_) => {}
                Err(SolveError::NoPairsPossible(_)) => return Ok(false),
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }

    /// Largest `n` in `[n_min, n_max]` solvable in both directions, by
    /// bisection. The answer is re-checked and, should feasibility turn out
    /// not to be monotone, the search descends linearly from it.
    pub fn find_max_feasible_n(
        &self,
        n_min: usize,
        n_max: usize,
        mode: Feasibility,
    ) -> Result<Option<usize>, SolveError> {
        if n_min < 2 || n_min > n_max {
            return Err(SolveError::InvalidRange {
                n_min,
                n_max,
                step: 1,
            });
        }
        let (mut lo, mut hi) = (n_min, n_max);
        if !self.feasible(lo, mode)? {
            return Ok(None);
        }
        // Invariant: lo feasible, everything above hi infeasible.
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.feasible(mid, mode)? {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let mut n = lo;
        while !self.feasible(n, mode)? {
            if n == n_min {
                return Ok(None);
            }
            n -= 1;
        }
        Ok(Some(n))
    }
}

/// What counts as "solvable" when searching over `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Feasibility {
    /// Any answer, fallback included; equivalent to `n` being matchable.
    #[default]
    WithFallback,
    /// Only answers produced by one of the three cases.
    LadderOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionResult {
    pub case: CaseTag,
    pub fallback: bool,
    #[serde(with = "ext_real")]
    pub gamma: f64,
    #[serde(with = "ext_real")]
    pub z: f64,
    pub sum: f64,
    pub sum_sq: f64,
    pub degenerate: bool,
    pub pairs: Vec<(usize, usize)>,
    pub trace: Vec<CaseTag>,
}

impl DirectionResult {
    fn new(s: Solved) -> Self {
        let sol = s.solution;
        Self {
            case: sol.case,
            fallback: sol.fallback,
            gamma: sol.gamma,
            z: sol.z(),
            sum: sol.stats.sum,
            sum_sq: sol.stats.sum_sq,
            degenerate: sol.stats.degenerate,
            pairs: sol.assignment.pairs().to_vec(),
            trace: s.trace,
        }
    }
}

/// The two-sided outcome at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub n: usize,
    pub alpha: f64,
    #[serde(with = "ext_real")]
    pub z_min: f64,
    #[serde(with = "ext_real")]
    pub z_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub classification: Robustness,
    /// The min direction attained a larger Z than the max direction and the
    /// two were exchanged.
    pub swapped: bool,
    pub min: DirectionResult,
    pub max: DirectionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub n: usize,
    /// `None` when `n` pairs cannot be matched.
    pub result: Option<TestResult>,
    pub elapsed_ms: f64,
}

pub fn solve(delta: &EffectMatrix, n: usize, direction: Direction) -> Result<Solved, SolveError> {
    Solver::new(delta)?.solve(n, direction)
}

pub fn run_test(delta: &EffectMatrix, n: usize, alpha: f64) -> Result<TestResult, SolveError> {
    Solver::new(delta)?.run_test(n, alpha)
}

pub fn sweep(
    delta: &EffectMatrix,
    n_min: usize,
    n_max: usize,
    step: usize,
    alpha: f64,
) -> Result<Vec<SweepEntry>, SolveError> {
    Solver::new(delta)?.sweep(n_min, n_max, step, alpha)
}

pub fn find_max_feasible_n(
    delta: &EffectMatrix,
    n_min: usize,
    n_max: usize,
) -> Result<Option<usize>, SolveError> {
    Solver::new(delta)?.find_max_feasible_n(n_min, n_max, Feasibility::WithFallback)
}
