#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use robustz_core::*;

pub fn dense(rows: &[&[f64]]) -> EffectMatrix {
    EffectMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Dataset, match matrix and effects for a config under `data/`.
pub fn load(config: &Path) -> (Dataset, MatchMatrix, EffectMatrix, RunConfig) {
    let cfg = load_config(config).unwrap();
    let ds = load_dataset(&cfg.data_path, &cfg).unwrap();
    let m = build_match_matrix(&ds, &cfg.covariate_rules).unwrap();
    let d = build_effect_matrix(&m, &ds).unwrap();
    (ds, m, d, cfg)
}

/// Upper normal tail by composite Simpson integration of the density over
/// `[z, z + 14]`.
pub fn tail_by_quadrature(z: f64) -> f64 {
    let steps = 40_000;
    let h = 14.0 / steps as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(z) + pdf(z + 14.0);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * pdf(z + k as f64 * h);
    }
    acc * h / 3.0
}

/// One fully-eligible `k x k` block whose effects are `y_t - y_c` with all
/// effects of the given sign.
pub fn forced_block(k: usize, negative: bool, rng: &mut impl Rng) -> EffectMatrix {
    let y_t: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
    let y_c: Vec<f64> = (0..k).map(|_| rng.gen_range(10.5..20.0)).collect();
    let rows: Vec<Vec<f64>> = y_t
        .iter()
        .map(|a| {
            y_c.iter()
                .map(|b| if negative { a - b } else { b - a })
                .collect()
        })
        .collect();
    EffectMatrix::from_dense(&rows).unwrap()
}

/// Size of a maximum matching, by brute force over rows.
pub fn brute_max_matching(d: &EffectMatrix) -> usize {
    fn go(d: &EffectMatrix, i: usize, used: &mut Vec<bool>) -> usize {
        if i == d.n_treated() {
            return 0;
        }
        let mut best = go(d, i + 1, used);
        for (j, _) in d.iter_row(i) {
            if !used[j] {
                used[j] = true;
                best = best.max(1 + go(d, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(d, 0, &mut vec![false; d.n_control()])
}

/// Checks one-to-one use, eligibility, cardinality and, for non-fallback
/// answers, the case's sign constraint.
pub fn solution_is_valid(d: &EffectMatrix, s: &GreedySolution, n: usize) -> bool {
    if s.assignment.n() != n || s.assignment.validate(d).is_err() {
        return false;
    }
    let sum: f64 = s.assignment.effects(d).unwrap().iter().sum();
    if sum != s.stats.sum {
        return false;
    }
    if s.fallback {
        return true;
    }
    match s.case {
        CaseTag::MinCase1 | CaseTag::MaxCase1 => sum >= 0.0 && s.gamma >= 0.0,
        CaseTag::MinCase2 | CaseTag::MaxCase2 => sum <= 0.0 && s.gamma <= 0.0,
        CaseTag::MinCase3 => sum <= 0.0 && s.gamma == 0.0,
        CaseTag::MaxCase3 => sum >= 0.0 && s.gamma == 0.0,
    }
}

/// Minimum cost over all maximum-cardinality injections of a dense matrix.
pub fn brute_assignment(costs: &[Vec<f64>]) -> (usize, f64) {
    fn go(
        costs: &[Vec<f64>],
        row: usize,
        used: &mut Vec<bool>,
        card: usize,
        sum: f64,
        best: &mut (usize, f64),
    ) {
        if row == costs.len() {
            if card > best.0 || (card == best.0 && sum < best.1) {
                *best = (card, sum);
            }
            return;
        }
        let remaining_cols = used.iter().filter(|u| !**u).count();
        if card + remaining_cols.min(costs.len() - row) < best.0 {
            return;
        }
        for j in 0..costs[row].len() {
            if !used[j] {
                used[j] = true;
                go(costs, row + 1, used, card + 1, sum + costs[row][j], best);
                used[j] = false;
            }
        }
        go(costs, row + 1, used, card, sum, best);
    }
    let mut best = (0, f64::INFINITY);
    go(
        costs,
        0,
        &mut vec![false; costs[0].len()],
        0,
        0.0,
        &mut best,
    );
    best
}
