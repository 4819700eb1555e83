//! Greedy schemes for the two quadratic cases of each direction.
//!
//! Both schemes walk the sorted effect list and commit pairs one at a time,
//! striking every entry that shares a row or column with a committed pair.
//! Removal is tracked with "next alive" skip pointers, so each scan only pays
//! for entries that are still alive.

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::matching::EffectMatrix;
use crate::statistic::{gamma_roots, z_statistic, Assignment, PairStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Min => "min",
            Direction::Max => "max",
        }
    }
}

/// The two quadratic sign regimes. Case 1 keeps the effect sum non-negative,
/// case 2 keeps it non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Case1,
    Case2,
}

impl Case {
    pub fn mirrored(self) -> Self {
        match self {
            Case::Case1 => Case::Case2,
            Case::Case2 => Case::Case1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    MinCase1,
    MinCase2,
    MinCase3,
    MaxCase1,
    MaxCase2,
    MaxCase3,
}

impl CaseTag {
    pub fn quadratic(direction: Direction, case: Case) -> Self {
        match (direction, case) {
            (Direction::Min, Case::Case1) => CaseTag::MinCase1,
            (Direction::Min, Case::Case2) => CaseTag::MinCase2,
            (Direction::Max, Case::Case1) => CaseTag::MaxCase1,
            (Direction::Max, Case::Case2) => CaseTag::MaxCase2,
        }
    }

    pub fn linear(direction: Direction) -> Self {
        match direction {
            Direction::Min => CaseTag::MinCase3,
            Direction::Max => CaseTag::MaxCase3,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            CaseTag::MinCase1 | CaseTag::MinCase2 | CaseTag::MinCase3 => Direction::Min,
            _ => Direction::Max,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::MinCase1 => "min_case1",
            CaseTag::MinCase2 => "min_case2",
            CaseTag::MinCase3 => "min_case3",
            CaseTag::MaxCase1 => "max_case1",
            CaseTag::MaxCase2 => "max_case2",
            CaseTag::MaxCase3 => "max_case3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub value: f64,
    pub i: usize,
    pub j: usize,
}

/// Eligible effects in ascending order, ties broken by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedEffectList {
    entries: Vec<Entry>,
    n_treated: usize,
    n_control: usize,
}

impl SortedEffectList {
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The list of `-Δ`.
    pub fn negated(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| Entry {
                value: -e.value,
                ..*e
            })
            .collect();
        Self::from_entries(entries, self.n_treated, self.n_control)
    }

    fn from_entries(mut entries: Vec<Entry>, n_treated: usize, n_control: usize) -> Self {
        entries.sort_unstable_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then((a.i, a.j).cmp(&(b.i, b.j)))
        });
        Self {
            entries,
            n_treated,
            n_control,
        }
    }
}

pub fn build_sorted_list(delta: &EffectMatrix) -> SortedEffectList {
    let entries = delta
        .iter()
        .map(|(i, j, value)| Entry { value, i, j })
        .collect();
    SortedEffectList::from_entries(entries, delta.n_treated(), delta.n_control())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedySolution {
    pub assignment: Assignment,
    pub stats: PairStats,
    /// The case's extremal root; equals the attained Z for the quadratic cases
    /// and `0` for the linear case.
    #[serde(with = "crate::statistic::ext_real")]
    pub gamma: f64,
    pub case: CaseTag,
    /// Set when no case succeeded and the solution is a plain size-`n`
    /// matching reported with its attained Z.
    pub fallback: bool,
}

impl GreedySolution {
    /// Attained Z of the assignment.
    pub fn z(&self) -> f64 {
        z_statistic(&self.stats).expect("solutions hold at least two pairs")
    }
}

/// Path-compressed "next alive index at or after p" pointers; index `len` is a
/// permanent sentinel.
struct Skip {
    next: Vec<usize>,
}

impl Skip {
    fn new(len: usize) -> Self {
        Self {
            next: (0..=len).collect(),
        }
    }

    fn remove(&mut self, p: usize) {
        self.next[p] = p + 1;
    }

    fn find(&mut self, p: usize) -> usize {
        let mut root = p;
        while self.next[root] != root {
            root = self.next[root];
        }
        let mut cur = p;
        while self.next[cur] != root {
            let nxt = self.next[cur];
            self.next[cur] = root;
            cur = nxt;
        }
        root
    }
}

/// Removal state over one sorted list.
struct Board<'a> {
    list: &'a SortedEffectList,
    alive: Skip,
    row_dead: Vec<bool>,
    col_dead: Vec<bool>,
    /// Entry positions grouped by row (CSR: `row_start[i]..row_start[i + 1]`).
    row_start: Vec<usize>,
    row_items: Vec<usize>,
    col_start: Vec<usize>,
    col_items: Vec<usize>,
    /// Alive entries still eligible as case-1 anchors, scanned from the low end.
    cand_lo: Skip,
    /// The same set scanned from the high end (index `len - 1 - p`).
    cand_hi: Skip,
}

impl<'a> Board<'a> {
    fn new(list: &'a SortedEffectList, with_candidates: bool) -> Self {
        let len = list.len();
        let (row_start, row_items) = group(list, list.n_treated, |e| e.i);
        let (col_start, col_items) = group(list, list.n_control, |e| e.j);
        let cand_len = if with_candidates { len } else { 0 };
        Self {
            list,
            alive: Skip::new(len),
            row_dead: vec![false; list.n_treated],
            col_dead: vec![false; list.n_control],
            row_start,
            row_items,
            col_start,
            col_items,
            cand_lo: Skip::new(cand_len),
            cand_hi: Skip::new(cand_len),
        }
    }

    fn len(&self) -> usize {
        self.list.len()
    }

    fn entry(&self, p: usize) -> Entry {
        self.list.entries[p]
    }

    fn next_alive(&mut self, p: usize) -> Option<usize> {
        let q = self.alive.find(p.min(self.len()));
        (q < self.len()).then_some(q)
    }

    fn drop_candidate(&mut self, p: usize) {
        let len = self.len();
        if self.cand_lo.next.len() > len {
            self.cand_lo.remove(p);
            self.cand_hi.remove(len - 1 - p);
        }
    }

    fn kill(&mut self, p: usize) {
        self.alive.remove(p);
        self.drop_candidate(p);
    }

    /// Commits entry `p`: strikes its row and column.
    fn take(&mut self, p: usize) -> Entry {
        let e = self.entry(p);
        if !std::mem::replace(&mut self.row_dead[e.i], true) {
            for k in self.row_start[e.i]..self.row_start[e.i + 1] {
                self.kill(self.row_items[k]);
            }
        }
        if !std::mem::replace(&mut self.col_dead[e.j], true) {
            for k in self.col_start[e.j]..self.col_start[e.j + 1] {
                self.kill(self.col_items[k]);
            }
        }
        e
    }

    fn lowest_candidate(&mut self) -> Option<usize> {
        let q = self.cand_lo.find(0);
        (q < self.len()).then_some(q)
    }

    fn highest_candidate(&mut self) -> Option<usize> {
        let r = self.cand_hi.find(0);
        (r < self.len()).then(|| self.len() - 1 - r)
    }

    /// First alive position whose value is at least `bound`, skipping entries
    /// in `row` or `col`.
    fn first_at_least(&mut self, bound: f64, avoid: Option<(usize, usize)>) -> Option<usize> {
        let start = self.list.entries.partition_point(|e| e.value < bound);
        let mut p = self.next_alive(start)?;
        if let Some((row, col)) = avoid {
            loop {
                let e = self.entry(p);
                if e.i != row && e.j != col {
                    break;
                }
                p = self.next_alive(p + 1)?;
            }
        }
        Some(p)
    }
}

/// Counting sort of list positions by `key`.
fn group(
    list: &SortedEffectList,
    buckets: usize,
    key: impl Fn(&Entry) -> usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut start = vec![0; buckets + 1];
    for e in &list.entries {
        start[key(e) + 1] += 1;
    }
    for b in 0..buckets {
        start[b + 1] += start[b];
    }
    let mut fill = start.clone();
    let mut items = vec![0; list.len()];
    for (p, e) in list.entries.iter().enumerate() {
        let k = key(e);
        items[fill[k]] = p;
        fill[k] += 1;
    }
    (start, items)
}

/// Greedy scheme for the minimisation direction.
///
/// Returns `Ok(None)` when the scheme cannot complete `n` pairs within the
/// case's sign constraint.
pub fn greedy_min(
    list: &SortedEffectList,
    n: usize,
    case: Case,
) -> Result<Option<GreedySolution>, SolveError> {
    if n < 2 {
        return Err(SolveError::TooFewPairs(n));
    }
    let picked = match case {
        Case::Case2 => min_case2(list, n),
        Case::Case1 => min_case1(list, n),
    };
    Ok(picked.and_then(|pairs| finish(pairs, CaseTag::quadratic(Direction::Min, case))))
}

/// Greedy scheme for the maximisation direction, by reflection through `-Δ`.
pub fn greedy_max(
    list: &SortedEffectList,
    n: usize,
    case: Case,
) -> Result<Option<GreedySolution>, SolveError> {
    greedy_max_reflected(&list.negated(), n, case)
}

/// [`greedy_max`] for callers that already hold the negated list.
pub(crate) fn greedy_max_reflected(
    negated: &SortedEffectList,
    n: usize,
    case: Case,
) -> Result<Option<GreedySolution>, SolveError> {
    Ok(greedy_min(negated, n, case.mirrored())?.map(|sol| {
        let stats = PairStats {
            sum: -sol.stats.sum,
            ..sol.stats
        };
        GreedySolution {
            stats,
            gamma: -sol.gamma,
            case: CaseTag::quadratic(Direction::Max, case),
            ..sol
        }
    }))
}

fn min_case2(list: &SortedEffectList, n: usize) -> Option<Vec<Entry>> {
    let mut board = Board::new(list, false);
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n {
        let p = board.next_alive(0)?;
        if board.entry(p).value > 0.0 {
            return None;
        }
        picked.push(board.take(p));
    }
    Some(picked)
}

fn min_case1(list: &SortedEffectList, n: usize) -> Option<Vec<Entry>> {
    let mut board = Board::new(list, true);
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        loop {
            let lo = board.lowest_candidate()?;
            let hi = board.highest_candidate()?;
            let (a, b) = (board.entry(lo), board.entry(hi));
            if b.value < 0.0 {
                return None;
            }
            let anchor = if a.value.abs() <= b.value { lo } else { hi };
            let e = board.entry(anchor);
            match board.first_at_least(-e.value, Some((e.i, e.j))) {
                Some(q) => {
                    picked.push(board.take(anchor));
                    picked.push(board.take(q));
                    break;
                }
                // Removals only shrink the partner pool, so this anchor can
                // never be completed later either.
                None => board.drop_candidate(anchor),
            }
        }
    }
    if n % 2 == 1 {
        let sum: f64 = picked.iter().map(|e| e.value).sum();
        let q = board.first_at_least(-sum, None)?;
        picked.push(board.take(q));
    }
    Some(picked)
}

/// Builds the solution and applies the terminal sign check.
fn finish(picked: Vec<Entry>, case: CaseTag) -> Option<GreedySolution> {
    let mut pairs: Vec<(usize, usize, f64)> = picked.iter().map(|e| (e.i, e.j, e.value)).collect();
    pairs.sort_unstable_by_key(|&(i, j, _)| (i, j));
    let effects: Vec<f64> = pairs.iter().map(|t| t.2).collect();
    let stats = PairStats::from_effects(&effects);
    let nonneg = matches!(case, CaseTag::MinCase1 | CaseTag::MaxCase1);
    if (nonneg && stats.sum < 0.0) || (!nonneg && stats.sum > 0.0) {
        return None;
    }
    let gamma = match gamma_roots(stats.sum, stats.sum_sq, stats.n) {
        Ok((_, hi)) if nonneg => hi,
        Ok((lo, _)) => lo,
        Err(_) => z_statistic(&stats).ok()?,
    };
    Some(GreedySolution {
        assignment: Assignment::new(pairs.into_iter().map(|(i, j, _)| (i, j)).collect()),
        stats,
        gamma,
        case,
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> EffectMatrix {
        EffectMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-4
    }

    #[test]
    fn sorted_ascending() {
        let list = build_sorted_list(&dense(&[&[4.0, 3.0], &[2.0, 1.0]]));
        let got: Vec<(f64, usize, usize)> =
            list.entries().iter().map(|e| (e.value, e.i, e.j)).collect();
        assert_eq!(
            got,
            vec![(1.0, 1, 1), (2.0, 1, 0), (3.0, 0, 1), (4.0, 0, 0)]
        );
    }

    #[test]
    fn zeros_kept_and_ties_by_index() {
        let d = EffectMatrix::from_triplets(2, 2, [(1, 0, 2.0), (0, 1, 2.0), (0, 0, 0.0)]).unwrap();
        let list = build_sorted_list(&d);
        let got: Vec<(usize, usize)> = list.entries().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(got, vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn min_case2_takes_most_negative() {
        let list = build_sorted_list(&dense(&[&[-4.0, -2.0], &[-3.0, -1.0]]));
        let sol = greedy_min(&list, 2, Case::Case2).unwrap().unwrap();
        assert_eq!(sol.assignment.pairs(), &[(0, 0), (1, 1)]);
        assert_eq!((sol.stats.sum, sol.stats.sum_sq), (-5.0, 17.0));
        assert!(close(sol.gamma, -2.3570));
        assert_eq!(sol.case, CaseTag::MinCase2);
    }

    #[test]
    fn min_case2_rejects_positive_completion() {
        let list = build_sorted_list(&dense(&[&[-1.0, 2.0], &[2.0, 3.0]]));
        assert_eq!(greedy_min(&list, 2, Case::Case2).unwrap(), None);
    }

    #[test]
    fn min_case1_pairs_anchor_with_partner() {
        let list = build_sorted_list(&dense(&[&[-1.0, 2.0], &[2.0, 3.0]]));
        let sol = greedy_min(&list, 2, Case::Case1).unwrap().unwrap();
        assert_eq!(sol.assignment.pairs(), &[(0, 0), (1, 1)]);
        assert_eq!((sol.stats.sum, sol.stats.sum_sq), (2.0, 10.0));
        assert!((sol.gamma - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn min_case1_odd_n() {
        let list = build_sorted_list(&dense(&[
            &[-1.0, 5.0, 9.0],
            &[2.0, 3.0, 7.0],
            &[4.0, 6.0, 8.0],
        ]));
        let sol = greedy_min(&list, 3, Case::Case1).unwrap().unwrap();
        assert_eq!(sol.stats.n, 3);
        assert!(sol.stats.sum >= 0.0);
        assert!(sol
            .assignment
            .validate(&dense(&[
                &[-1.0, 5.0, 9.0],
                &[2.0, 3.0, 7.0],
                &[4.0, 6.0, 8.0]
            ]))
            .is_ok());
    }

    #[test]
    fn max_examples() {
        let pos = build_sorted_list(&dense(&[&[4.0, 3.0], &[2.0, 1.0]]));
        let sol = greedy_max(&pos, 2, Case::Case1).unwrap().unwrap();
        assert_eq!(sol.assignment.pairs(), &[(0, 0), (1, 1)]);
        assert!(close(sol.gamma, 2.3570));
        assert_eq!(sol.stats.sum, 5.0);
        assert_eq!(sol.case, CaseTag::MaxCase1);

        let neg = build_sorted_list(&dense(&[&[-4.0, -2.0], &[-3.0, -1.0]]));
        assert_eq!(greedy_max(&neg, 2, Case::Case1).unwrap(), None);
        let sol = greedy_max(&neg, 2, Case::Case2).unwrap().unwrap();
        assert!(close(sol.gamma, -2.3570));
        assert_eq!(sol.case, CaseTag::MaxCase2);
    }

    #[test]
    fn too_few_pairs() {
        let list = build_sorted_list(&dense(&[&[1.0]]));
        assert_eq!(
            greedy_min(&list, 1, Case::Case1),
            Err(SolveError::TooFewPairs(1))
        );
        assert_eq!(greedy_min(&list, 2, Case::Case2).unwrap(), None);
    }

    #[test]
    fn degenerate_selection_has_infinite_gamma() {
        let list = build_sorted_list(&dense(&[&[-2.0, 5.0], &[5.0, -2.0]]));
        let sol = greedy_min(&list, 2, Case::Case2).unwrap().unwrap();
        assert!(sol.stats.degenerate);
        assert_eq!(sol.gamma, f64::NEG_INFINITY);
    }
}
