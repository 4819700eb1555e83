//! Good-match structure: which (treated, control) pairs an experimenter may
//! assign, and the outcome difference each such pair would contribute.
//!
//! Indices are 0-based and follow dataset row order within each group.
//! Eligible pairs are kept sorted by `(treated, control)`.

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{CovValue, Dataset};
use crate::error::MatchError;

/// How a covariate must agree for a pair to be eligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleKind {
    /// Values must be equal (numeric equality, or exact string equality).
    Exact,
    /// Numeric values must satisfy `|x_t - x_c| <= tolerance`.
    Caliper { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct CovariateRule {
    pub column: String,
    pub kind: RuleKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    column: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

impl TryFrom<RawRule> for CovariateRule {
    type Error = String;

    fn try_from(raw: RawRule) -> Result<Self, Self::Error> {
        let kind = match (raw.kind.as_str(), raw.tolerance) {
            ("exact", None) => RuleKind::Exact,
            ("exact", Some(_)) => {
                return Err(format!("exact rule on `{}` takes no tolerance", raw.column))
            }
            ("caliper", Some(t)) if t >= 0.0 && t.is_finite() => RuleKind::Caliper { tolerance: t },
            ("caliper", Some(t)) => {
                return Err(format!(
                    "caliper tolerance {t} on `{}` must be >= 0",
                    raw.column
                ))
            }
            ("caliper", None) => {
                return Err(format!(
                    "caliper rule on `{}` needs a tolerance",
                    raw.column
                ))
            }
            (other, _) => return Err(format!("unknown rule kind `{other}`")),
        };
        Ok(CovariateRule {
            column: raw.column,
            kind,
        })
    }
}

impl From<CovariateRule> for RawRule {
    fn from(rule: CovariateRule) -> Self {
        match rule.kind {
            RuleKind::Exact => RawRule {
                column: rule.column,
                kind: "exact".into(),
                tolerance: None,
            },
            RuleKind::Caliper { tolerance } => RawRule {
                column: rule.column,
                kind: "caliper".into(),
                tolerance: Some(tolerance),
            },
        }
    }
}

impl CovariateRule {
    pub fn exact(column: impl Into<String>) -> Self {
        Self {
            column: column.into(),
            kind: RuleKind::Exact,
        }
    }

    pub fn caliper(column: impl Into<String>, tolerance: f64) -> Self {
        Self {
            column: column.into(),
            kind: RuleKind::Caliper { tolerance },
        }
    }

    /// Whether two values agree under this rule. Callers guarantee caliper
    /// rules only see numbers.
    pub fn admits(&self, a: &CovValue, b: &CovValue) -> bool {
        match self.kind {
            RuleKind::Exact => a == b,
            RuleKind::Caliper { tolerance } => match (a.as_number(), b.as_number()) {
                (Some(x), Some(y)) => (x - y).abs() <= tolerance,
                _ => false,
            },
        }
    }
}

/// The logical good-match matrix, stored as its sorted eligible set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchMatrix {
    pub treated_ids: Vec<String>,
    pub control_ids: Vec<String>,
    eligible: Vec<(usize, usize)>,
}

impl MatchMatrix {
    /// Builds a matrix from arbitrary-order pairs; rejects duplicates and
    /// out-of-range indices.
    pub fn from_pairs(
        treated_ids: Vec<String>,
        control_ids: Vec<String>,
        mut pairs: Vec<(usize, usize)>,
    ) -> Result<Self, MatchError> {
        let (nt, nc) = (treated_ids.len(), control_ids.len());
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= nt || j >= nc) {
            return Err(MatchError::IndexOutOfRange(i, j));
        }
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(MatchError::DuplicatePair(w[0].0, w[0].1));
        }
        Ok(Self {
            treated_ids,
            control_ids,
            eligible: pairs,
        })
    }

    pub fn n_treated(&self) -> usize {
        self.treated_ids.len()
    }

    pub fn n_control(&self) -> usize {
        self.control_ids.len()
    }

    /// Number of eligible pairs, i.e. the count of non-zero entries of D.
    pub fn nnz(&self) -> usize {
        self.eligible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eligible.is_empty()
    }

    pub fn eligible(&self) -> &[(usize, usize)] {
        &self.eligible
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.eligible.binary_search(&(i, j)).ok()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.position(i, j).is_some()
    }

    /// Treated rows with at least one eligible pair.
    pub fn active_treated(&self) -> usize {
        let mut rows: Vec<usize> = self.eligible.iter().map(|&(i, _)| i).collect();
        rows.dedup();
        rows.len()
    }

    /// Control columns with at least one eligible pair.
    pub fn active_control(&self) -> usize {
        let mut cols: Vec<usize> = self.eligible.iter().map(|&(_, j)| j).collect();
        cols.sort_unstable();
        cols.dedup();
        cols.len()
    }
}

/// Treatment effects `y_t - y_c` keyed by the eligible pairs of a
/// [`MatchMatrix`]. Zero effects are stored like any other value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectMatrix {
    matches: MatchMatrix,
    effects: Vec<f64>,
}

impl EffectMatrix {
    /// Builds an effect matrix directly from `(i, j, effect)` triplets with
    /// anonymous ids `t0, t1, ...` / `c0, c1, ...`.
    pub fn from_triplets(
        n_treated: usize,
        n_control: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MatchError> {
        let mut triplets: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if let Some(&(i, j, _)) = triplets.iter().find(|t| !t.2.is_finite()) {
            return Err(MatchError::NonFiniteEffect(i, j));
        }
        let pairs = triplets.iter().map(|&(i, j, _)| (i, j)).collect();
        let matches = MatchMatrix::from_pairs(
            (0..n_treated).map(|i| format!("t{i}")).collect(),
            (0..n_control).map(|j| format!("c{j}")).collect(),
            pairs,
        )?;
        let effects = triplets.into_iter().map(|t| t.2).collect();
        Ok(Self { matches, effects })
    }

    /// Dense row-major matrix; every cell is eligible.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, MatchError> {
        let n_control = rows.first().map_or(0, Vec::len);
        let triplets = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (i, j, v)));
        Self::from_triplets(rows.len(), n_control, triplets)
    }

    pub fn matches(&self) -> &MatchMatrix {
        &self.matches
    }

    pub fn n_treated(&self) -> usize {
        self.matches.n_treated()
    }

    pub fn n_control(&self) -> usize {
        self.matches.n_control()
    }

    pub fn nnz(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Effects aligned with [`MatchMatrix::eligible`].
    pub fn effects(&self) -> &[f64] {
        &self.effects
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.matches.position(i, j).map(|k| self.effects[k])
    }

    /// `(i, j, effect)` in `(i, j)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.matches
            .eligible
            .iter()
            .zip(&self.effects)
            .map(|(&(i, j), &e)| (i, j, e))
    }

    /// `(j, effect)` for the eligible pairs of treated row `i`.
    pub fn iter_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let pairs = &self.matches.eligible;
        let start = pairs.partition_point(|&(r, _)| r < i);
        let end = pairs.partition_point(|&(r, _)| r <= i);
        pairs[start..end]
            .iter()
            .zip(&self.effects[start..end])
            .map(|(&(_, j), &e)| (j, e))
    }

    /// Same eligibility with every effect negated.
    pub fn negated(&self) -> Self {
        Self {
            matches: self.matches.clone(),
            effects: self.effects.iter().map(|e| -e).collect(),
        }
    }

    /// Writes `i,j,effect` lines sorted by `(i, j)`.
    pub fn write_coordinate_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, j, e) in self.iter() {
            writeln!(out, "{i},{j},{e}")?;
        }
        Ok(())
    }
}

/// Computes the eligible set: a pair qualifies when every rule admits it.
pub fn build_match_matrix(
    dataset: &Dataset,
    rules: &[CovariateRule],
) -> Result<MatchMatrix, MatchError> {
    if rules.is_empty() {
        return Err(MatchError::NoRules);
    }
    let treated: Vec<_> = dataset.treated().collect();
    let control: Vec<_> = dataset.control().collect();

    for rule in rules {
        if let RuleKind::Caliper { tolerance } = rule.kind {
            if tolerance < 0.0 {
                return Err(MatchError::NegativeTolerance {
                    column: rule.column.clone(),
                    tolerance,
                });
            }
        }
        for unit in treated.iter().chain(&control) {
            let value = unit
                .covariates
                .get(&rule.column)
                .ok_or_else(|| MatchError::UnknownCovariate(rule.column.clone()))?;
            if let (RuleKind::Caliper { .. }, CovValue::Category(text)) = (rule.kind, value) {
                return Err(MatchError::CaliperOnCategorical {
                    column: rule.column.clone(),
                    value: text.clone(),
                });
            }
        }
    }

    // Exact rules partition both groups into buckets; calipers are only
    // checked within a bucket.
    let exact: Vec<&CovariateRule> = rules.iter().filter(|r| r.kind == RuleKind::Exact).collect();
    let calipers: Vec<&CovariateRule> =
        rules.iter().filter(|r| r.kind != RuleKind::Exact).collect();
    let key = |unit: &crate::data_io::Unit| -> Vec<String> {
        exact
            .iter()
            .map(|r| match &unit.covariates[&r.column] {
                // -0.0 and 0.0 compare equal, so they must share a key.
                CovValue::Number(x) => format!("n{}", if *x == 0.0 { 0.0 } else { *x }),
                CovValue::Category(s) => format!("s{s}"),
            })
            .collect()
    };
    let mut buckets: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    for (j, unit) in control.iter().enumerate() {
        buckets.entry(key(unit)).or_default().push(j);
    }

    let rows: Vec<Vec<(usize, usize)>> = treated
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let Some(candidates) = buckets.get(&key(t)) else {
                return Vec::new();
            };
            candidates
                .iter()
                .filter(|&&j| {
                    calipers.iter().all(|r| {
                        r.admits(&t.covariates[&r.column], &control[j].covariates[&r.column])
                    })
                })
                .map(|&j| (i, j))
                .collect()
        })
        .collect();

    MatchMatrix::from_pairs(
        treated.iter().map(|u| u.id.clone()).collect(),
        control.iter().map(|u| u.id.clone()).collect(),
        rows.into_iter().flatten().collect(),
    )
}

/// Attaches `y_t - y_c` to every eligible pair.
pub fn build_effect_matrix(
    matches: &MatchMatrix,
    dataset: &Dataset,
) -> Result<EffectMatrix, MatchError> {
    let treated: HashMap<&str, f64> = dataset
        .treated()
        .map(|u| (u.id.as_str(), u.outcome))
        .collect();
    let control: HashMap<&str, f64> = dataset
        .control()
        .map(|u| (u.id.as_str(), u.outcome))
        .collect();
    let resolve =
        |ids: &[String], table: &HashMap<&str, f64>, group| -> Result<Vec<f64>, MatchError> {
            ids.iter()
                .map(|id| {
                    table
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| MatchError::UnknownUnit(id.clone(), group))
                })
                .collect()
        };
    let y_t = resolve(&matches.treated_ids, &treated, "treated")?;
    let y_c = resolve(&matches.control_ids, &control, "control")?;
    let effects = matches
        .eligible
        .iter()
        .map(|&(i, j)| y_t[i] - y_c[j])
        .collect();
    Ok(EffectMatrix {
        matches: matches.clone(),
        effects,
    })
}

/// One connected component of the eligibility graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub treated: Vec<usize>,
    pub control: Vec<usize>,
    /// Every treated row of the block has the same eligible column set.
    pub identical_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockPartition {
    pub blocks: Vec<Block>,
}

impl BlockPartition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The exact-matching structure: every block has identical rows.
    pub fn identical_rows(&self) -> bool {
        self.blocks.iter().all(|b| b.identical_rows)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Splits the eligibility graph into connected components, ordered by their
/// smallest treated index.
pub fn partition_blocks(matches: &MatchMatrix) -> BlockPartition {
    let nt = matches.n_treated();
    let mut dsu = DisjointSet::new(nt + matches.n_control());
    for &(i, j) in &matches.eligible {
        dsu.union(i, nt + j);
    }

    let mut block_of_root: HashMap<usize, usize> = HashMap::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut row_sets: Vec<Vec<Vec<usize>>> = Vec::new();
    // eligible is sorted by (i, j), so rows appear contiguously and in order.
    let mut k = 0;
    let pairs = &matches.eligible;
    while k < pairs.len() {
        let i = pairs[k].0;
        let start = k;
        while k < pairs.len() && pairs[k].0 == i {
            k += 1;
        }
        let cols: Vec<usize> = pairs[start..k].iter().map(|&(_, j)| j).collect();
        let root = dsu.find(i);
        let b = *block_of_root.entry(root).or_insert_with(|| {
            blocks.push(Block {
                treated: Vec::new(),
                control: Vec::new(),
                identical_rows: true,
            });
            row_sets.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].treated.push(i);
        row_sets[b].push(cols);
    }
    for (block, rows) in blocks.iter_mut().zip(&row_sets) {
        let mut cols: Vec<usize> = rows.iter().flatten().copied().collect();
        cols.sort_unstable();
        cols.dedup();
        block.control = cols;
        block.identical_rows = rows.windows(2).all(|w| w[0] == w[1]);
    }
    BlockPartition { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::Unit;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn unit(id: usize, treated: bool, outcome: f64, covs: &[(&str, CovValue)]) -> Unit {
        Unit {
            id: id.to_string(),
            covariates: covs
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect::<BTreeMap<_, _>>(),
            treated,
            outcome,
        }
    }

    fn dataset(units: Vec<Unit>) -> Dataset {
        Dataset {
            units,
            covariate_names: vec![],
            excluded: 0,
        }
    }

    #[test]
    fn identical_covariates_are_eligible_under_exact_rules() {
        let covs = [
            ("a", CovValue::Number(1.0)),
            ("b", CovValue::Category("x".into())),
        ];
        let data = dataset(vec![unit(1, true, 1.0, &covs), unit(2, false, 0.0, &covs)]);
        let d = build_match_matrix(
            &data,
            &[CovariateRule::exact("a"), CovariateRule::exact("b")],
        )
        .unwrap();
        assert_eq!(d.eligible(), &[(0, 0)]);
    }

    #[test]
    fn caliper_excludes_distant_values() {
        let data = dataset(vec![
            unit(1, true, 1.0, &[("x", CovValue::Number(5.0))]),
            unit(2, false, 0.0, &[("x", CovValue::Number(8.0))]),
        ]);
        let d = build_match_matrix(&data, &[CovariateRule::caliper("x", 2.0)]).unwrap();
        assert!(d.is_empty());
        let d = build_match_matrix(&data, &[CovariateRule::caliper("x", 3.0)]).unwrap();
        assert_eq!(d.nnz(), 1, "calipers are inclusive");
    }

    #[test]
    fn caliper_on_categorical_is_rejected() {
        let data = dataset(vec![
            unit(1, true, 1.0, &[("x", CovValue::Category("red".into()))]),
            unit(2, false, 0.0, &[("x", CovValue::Category("red".into()))]),
        ]);
        let err = build_match_matrix(&data, &[CovariateRule::caliper("x", 1.0)]).unwrap_err();
        assert!(matches!(err, MatchError::CaliperOnCategorical { .. }));
        assert_eq!(
            build_match_matrix(&data, &[]).unwrap_err(),
            MatchError::NoRules
        );
    }

    #[test]
    fn effects_are_outcome_differences() {
        let x = [("x", CovValue::Number(0.0))];
        let data = dataset(vec![
            unit(1, true, 5.0, &x),
            unit(2, true, 3.0, &x),
            unit(3, false, 1.0, &x),
            unit(4, false, 2.0, &x),
        ]);
        let d = build_match_matrix(&data, &[CovariateRule::exact("x")]).unwrap();
        let delta = build_effect_matrix(&d, &data).unwrap();
        let got: Vec<_> = delta.iter().collect();
        assert_eq!(
            got,
            vec![(0, 0, 4.0), (0, 1, 3.0), (1, 0, 2.0), (1, 1, 1.0)]
        );
    }

    #[test]
    fn ineligible_pair_is_absent_and_zero_effect_is_kept() {
        let data = dataset(vec![
            unit(1, true, 2.0, &[("x", CovValue::Number(0.0))]),
            unit(2, false, 2.0, &[("x", CovValue::Number(0.0))]),
            unit(3, false, 1.0, &[("x", CovValue::Number(9.0))]),
        ]);
        let d = build_match_matrix(&data, &[CovariateRule::exact("x")]).unwrap();
        let delta = build_effect_matrix(&d, &data).unwrap();
        assert_eq!(delta.get(0, 0), Some(0.0));
        assert_eq!(delta.get(0, 1), None);
    }

    #[test]
    fn unknown_unit_ids_are_rejected() {
        let d =
            MatchMatrix::from_pairs(vec!["nope".into()], vec!["2".into()], vec![(0, 0)]).unwrap();
        let data = dataset(vec![unit(1, true, 2.0, &[]), unit(2, false, 2.0, &[])]);
        assert!(matches!(
            build_effect_matrix(&d, &data),
            Err(MatchError::UnknownUnit(_, "treated"))
        ));
    }

    #[test]
    fn from_pairs_validates() {
        let ids = |n: usize| (0..n).map(|k| k.to_string()).collect::<Vec<_>>();
        assert_eq!(
            MatchMatrix::from_pairs(ids(1), ids(1), vec![(0, 1)]).unwrap_err(),
            MatchError::IndexOutOfRange(0, 1)
        );
        assert_eq!(
            MatchMatrix::from_pairs(ids(1), ids(1), vec![(0, 0), (0, 0)]).unwrap_err(),
            MatchError::DuplicatePair(0, 0)
        );
    }

    #[test]
    fn two_components() {
        let d = MatchMatrix::from_pairs(
            (0..4).map(|k| k.to_string()).collect(),
            (0..4).map(|k| k.to_string()).collect(),
            vec![(0, 0), (0, 1), (1, 0), (2, 2), (3, 3), (3, 2)],
        )
        .unwrap();
        let p = partition_blocks(&d);
        assert_eq!(p.len(), 2);
        assert_eq!(p.blocks[0].treated, vec![0, 1]);
        assert_eq!(p.blocks[0].control, vec![0, 1]);
        assert!(!p.blocks[0].identical_rows);
        assert_eq!(p.blocks[1].treated, vec![2, 3]);
        assert!(!p.identical_rows());
    }

    #[test]
    fn complete_bipartite_is_one_identical_block() {
        let delta = EffectMatrix::from_dense(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let p = partition_blocks(delta.matches());
        assert_eq!(p.len(), 1);
        assert!(p.identical_rows());
    }

    #[test]
    fn coordinate_list_dump() {
        let delta = EffectMatrix::from_triplets(2, 2, [(1, 0, -2.5), (0, 1, 3.0)]).unwrap();
        let mut out = Vec::new();
        delta.write_coordinate_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0,1,3\n1,0,-2.5\n");
    }

    fn categorical_dataset(cats: &[(bool, u8, u8)]) -> Dataset {
        dataset(
            cats.iter()
                .enumerate()
                .map(|(k, &(treated, a, b))| {
                    unit(
                        k,
                        treated,
                        k as f64,
                        &[
                            ("a", CovValue::Category(format!("a{a}"))),
                            ("b", CovValue::Number(b as f64)),
                        ],
                    )
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn caliper_is_symmetric(x in -1e3f64..1e3, y in -1e3f64..1e3, t in 0.0f64..50.0) {
            let rule = CovariateRule::caliper("x", t);
            let (a, b) = (CovValue::Number(x), CovValue::Number(y));
            prop_assert_eq!(rule.admits(&a, &b), rule.admits(&b, &a));
        }

        #[test]
        fn exact_matching_gives_identical_rows(
            cats in proptest::collection::vec((any::<bool>(), 0u8..3, 0u8..2), 2..30)
        ) {
            let data = categorical_dataset(&cats);
            prop_assume!(data.n_treated() > 0 && data.n_control() > 0);
            let d = build_match_matrix(&data, &[CovariateRule::exact("a"), CovariateRule::exact("b")]).unwrap();
            let p = partition_blocks(&d);
            prop_assert!(p.identical_rows());
            // blocks are disjoint and cover every index that appears in a pair
            let mut seen_t: Vec<usize> = p.blocks.iter().flat_map(|b| b.treated.clone()).collect();
            let mut seen_c: Vec<usize> = p.blocks.iter().flat_map(|b| b.control.clone()).collect();
            let (nt, nc) = (seen_t.len(), seen_c.len());
            seen_t.sort_unstable();
            seen_t.dedup();
            seen_c.sort_unstable();
            seen_c.dedup();
            prop_assert_eq!(nt, seen_t.len());
            prop_assert_eq!(nc, seen_c.len());
            prop_assert_eq!(nt, d.active_treated());
            prop_assert_eq!(nc, d.active_control());
        }

        #[test]
        fn block_sum_is_independent_of_pairing(
            y_t in proptest::collection::vec(-10i32..10, 4),
            y_c in proptest::collection::vec(-10i32..10, 4),
            k in 1usize..=4,
        ) {
            // A complete block: any bijection between the first k treated and
            // the first k control units has the same total effect.
            let rows: Vec<Vec<f64>> = y_t.iter().map(|&t| y_c.iter().map(|&c| (t - c) as f64).collect()).collect();
            let delta = EffectMatrix::from_dense(&rows).unwrap();
            let mut perm: Vec<usize> = (0..k).collect();
            let mut sums = Vec::new();
            permute(&mut perm, 0, &mut |p| {
                sums.push(p.iter().enumerate().map(|(i, &j)| delta.get(i, j).unwrap()).sum::<f64>());
            });
            prop_assert!(sums.windows(2).all(|w| w[0] == w[1]));
        }
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for s in k..items.len() {
            items.swap(k, s);
            permute(items, k + 1, visit);
            items.swap(k, s);
        }
    }
}
