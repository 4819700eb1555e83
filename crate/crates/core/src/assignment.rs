//! Minimum-cost maximum-cardinality matching over the eligible pairs, and the
//! linear (case 3) feasibility test built on it.
//!
//! The matching is computed by successive shortest augmenting paths with
//! Dijkstra and node potentials, one connected component at a time. Only
//! eligible pairs carry edges, so no big-M padding is involved.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::SolveError;
use crate::greedy::{CaseTag, Direction, GreedySolution};
use crate::matching::{partition_blocks, EffectMatrix};
use crate::statistic::{Assignment, PairStats};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMatching {
    /// `(i, j, cost)` sorted by `(i, j)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub total_cost: f64,
    pub cardinality: usize,
}

/// Minimum total effect among all maximum-cardinality matchings of `delta`.
pub fn hungarian_min(delta: &EffectMatrix) -> Result<CostMatching, SolveError> {
    if delta.is_empty() {
        return Err(SolveError::EmptyEligibility);
    }
    let partition = partition_blocks(delta.matches());
    let mut local_col = vec![usize::MAX; delta.n_control()];
    let mut pairs = Vec::new();
    for block in &partition.blocks {
        for (k, &j) in block.control.iter().enumerate() {
            local_col[j] = k;
        }
        let adj: Vec<Vec<(usize, f64)>> = block
            .treated
            .iter()
            .map(|&i| delta.iter_row(i).map(|(j, c)| (local_col[j], c)).collect())
            .collect();
        for (li, lj) in ssp(&adj, block.control.len()) {
            let i = block.treated[li];
            let c = adj[li]
                .iter()
                .find(|e| e.0 == lj)
                .expect("edge of the block")
                .1;
            pairs.push((i, block.control[lj], c));
        }
    }
    pairs.sort_unstable_by_key(|&(i, j, _)| (i, j));
    Ok(CostMatching {
        total_cost: pairs.iter().map(|p| p.2).sum(),
        cardinality: pairs.len(),
        pairs,
    })
}

/// Heap key ordered by distance, then node id.
#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Successive shortest paths on one bipartite component. `adj[i]` lists
/// `(right, cost)`. Returns matched `(left, right)` pairs.
///
/// Nodes are numbered left `0..nl`, right `nl..nl+nr`; the source and sink
/// are implicit.
fn ssp(adj: &[Vec<(usize, f64)>], nr: usize) -> Vec<(usize, usize)> {
    let nl = adj.len();
    let nv = nl + nr;
    let mut match_l: Vec<Option<usize>> = vec![None; nl];
    let mut match_r: Vec<Option<usize>> = vec![None; nr];
    let mut cost_r = vec![0.0; nr]; // cost of the matched edge into each right node

    // Potentials make every residual reduced cost non-negative; right nodes
    // start at their cheapest incoming edge. The source keeps potential 0.
    let mut pot = vec![0.0; nv];
    let mut min_in = vec![f64::INFINITY; nr];
    for edges in adj {
        for &(j, c) in edges {
            if c < min_in[j] {
                min_in[j] = c;
            }
        }
    }
    pot[nl..nl + nr].copy_from_slice(&min_in[..nr]);
    let mut pot_t = min_in.iter().copied().fold(f64::INFINITY, f64::min);

    let mut dist = vec![f64::INFINITY; nv];
    let mut done = vec![false; nv];
    let mut pred = vec![usize::MAX; nv];
    let mut touched: Vec<usize> = Vec::new();
    let reduced = |c: f64, pu: f64, pv: f64| (c + pu - pv).max(0.0);

    loop {
        for &v in &touched {
            dist[v] = f64::INFINITY;
            done[v] = false;
            pred[v] = usize::MAX;
        }
        touched.clear();
        let mut heap = BinaryHeap::new();
        for i in 0..nl {
            if match_l[i].is_none() {
                dist[i] = reduced(0.0, 0.0, pot[i]);
                touched.push(i);
                heap.push(Reverse(Key(dist[i], i)));
            }
        }
        let mut best_t = f64::INFINITY;
        let mut end: Option<usize> = None;
        while let Some(Reverse(Key(d, v))) = heap.pop() {
            if done[v] || d > dist[v] {
                continue;
            }
            if d >= best_t {
                break;
            }
            done[v] = true;
            if v < nl {
                for &(j, c) in &adj[v] {
                    if match_l[v] == Some(j) {
                        continue;
                    }
                    let w = nl + j;
                    let nd = d + reduced(c, pot[v], pot[w]);
                    if nd < dist[w] {
                        if dist[w].is_infinite() {
                            touched.push(w);
                        }
                        dist[w] = nd;
                        pred[w] = v;
                        heap.push(Reverse(Key(nd, w)));
                    }
                }
            } else {
                let j = v - nl;
                match match_r[j] {
                    None => {
                        let nd = d + reduced(0.0, pot[v], pot_t);
                        if nd < best_t {
                            best_t = nd;
                            end = Some(j);
                        }
                    }
                    Some(k) => {
                        let nd = d + reduced(-cost_r[j], pot[v], pot[k]);
                        if nd < dist[k] {
                            if dist[k].is_infinite() {
                                touched.push(k);
                            }
                            dist[k] = nd;
                            pred[k] = v;
                            heap.push(Reverse(Key(nd, k)));
                        }
                    }
                }
            }
        }
        let Some(end) = end else { break };

        for v in 0..nv {
            pot[v] += if done[v] { dist[v].min(best_t) } else { best_t };
        }
        pot_t += best_t;

        // Walk back from the free right node, flipping edges along the path.
        let mut w = nl + end;
        loop {
            let i = pred[w];
            let j = w - nl;
            let prev = match_l[i];
            match_l[i] = Some(j);
            match_r[j] = Some(i);
            cost_r[j] = adj[i].iter().find(|e| e.0 == j).expect("path edge").1;
            match prev {
                None => break,
                Some(pj) => w = nl + pj,
            }
        }
    }

    match_l
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j)))
        .collect()
}

/// The linear case: take `n` pairs of an optimal matching and accept them when
/// their effect sum has the direction's sign (`≤ 0` for min, `≥ 0` for max).
///
/// `matching` must come from [`hungarian_min`] on `delta` for min and on
/// `-delta` for max.
pub fn case3_from_matching(
    delta: &EffectMatrix,
    matching: &CostMatching,
    n: usize,
    direction: Direction,
) -> Result<Option<GreedySolution>, SolveError> {
    if n < 2 {
        return Err(SolveError::TooFewPairs(n));
    }
    let Some(pairs) = first_n_pairs(delta, matching, n, direction) else {
        return Ok(None);
    };
    let assignment = Assignment::new(pairs);
    let stats = PairStats::from_effects(&assignment.effects(delta)?);
    let feasible = match direction {
        Direction::Min => stats.sum <= 0.0,
        Direction::Max => stats.sum >= 0.0,
    };
    Ok(feasible.then(|| GreedySolution {
        assignment,
        stats,
        gamma: 0.0,
        case: CaseTag::linear(direction),
        fallback: false,
    }))
}

/// The `n` cheapest (min) or most expensive (max) pairs of the matching, by
/// original effect with `(i, j)` tie order. `None` if the matching is short.
pub(crate) fn first_n_pairs(
    delta: &EffectMatrix,
    matching: &CostMatching,
    n: usize,
    direction: Direction,
) -> Option<Vec<(usize, usize)>> {
    if matching.cardinality < n {
        return None;
    }
    let mut ranked: Vec<(f64, usize, usize)> = matching
        .pairs
        .iter()
        .map(|&(i, j, _)| {
            let e = delta.get(i, j).expect("matched pair is eligible");
            (if direction == Direction::Min { e } else { -e }, i, j)
        })
        .collect();
    ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    Some(ranked.into_iter().take(n).map(|(_, i, j)| (i, j)).collect())
}

/// [`case3_from_matching`] solving the matching on the fly.
pub fn case3_test(
    delta: &EffectMatrix,
    n: usize,
    direction: Direction,
) -> Result<Option<GreedySolution>, SolveError> {
    if n < 2 {
        return Err(SolveError::TooFewPairs(n));
    }
    let matching = match direction {
        Direction::Min => hungarian_min(delta)?,
        Direction::Max => hungarian_min(&delta.negated())?,
    };
    case3_from_matching(delta, &matching, n, direction)
}
