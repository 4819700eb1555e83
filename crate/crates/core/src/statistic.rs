//! Matched-pair Z statistic and everything derived from it: the extremal
//! γ roots, normal tail probabilities, P-values, robustness classes and the
//! allowable-gap margin.
//!
//! Z is an extended real. A zero-variance selection (`nQ = S²`) has no finite
//! statistic; it is reported as `+∞` / `-∞` by the sign of `S`, or `0` when
//! `S = 0`.

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::matching::EffectMatrix;

/// Relative tolerance below which `nQ - S²` counts as zero.
const DEGENERACY_RTOL: f64 = 1e-12;
/// Tolerance for treating two P-values as equal.
pub const P_EQUALITY_TOL: f64 = 1e-12;

/// A set of `(treated, control)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pairs: Vec<(usize, usize)>,
}

impl Assignment {
    /// Pairs are stored sorted; validity is checked by [`Assignment::validate`].
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    /// Checks one-to-one use of units and eligibility of every pair.
    pub fn validate(&self, delta: &EffectMatrix) -> Result<(), SolveError> {
        let mut rows = vec![false; delta.n_treated()];
        let mut cols = vec![false; delta.n_control()];
        for &(i, j) in &self.pairs {
            if !delta.matches().contains(i, j) {
                return Err(SolveError::IneligiblePair(i, j));
            }
            if std::mem::replace(&mut rows[i], true) {
                return Err(SolveError::DuplicateTreated(i));
            }
            if std::mem::replace(&mut cols[j], true) {
                return Err(SolveError::DuplicateControl(j));
            }
        }
        Ok(())
    }

    /// Effects of the selected pairs, in pair order.
    pub fn effects(&self, delta: &EffectMatrix) -> Result<Vec<f64>, SolveError> {
        self.pairs
            .iter()
            .map(|&(i, j)| delta.get(i, j).ok_or(SolveError::IneligiblePair(i, j)))
            .collect()
    }
}

/// Sum, sum of squares and spread of a selection of pair effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub sum: f64,
    pub sum_sq: f64,
    pub n: usize,
    pub sigma_hat: f64,
    pub degenerate: bool,
}

impl PairStats {
    pub fn from_effects(effects: &[f64]) -> Self {
        let (sum, sum_sq) = effects
            .iter()
            .fold((0.0, 0.0), |(s, q), &e| (s + e, q + e * e));
        Self::from_sums(sum, sum_sq, effects.len())
    }

    pub fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let spread = spread(sum, sum_sq, n);
        let nf = n as f64;
        let degenerate = spread == 0.0;
        let sigma_hat = if n == 0 { 0.0 } else { spread.sqrt() / nf };
        Self {
            sum,
            sum_sq,
            n,
            sigma_hat,
            degenerate,
        }
    }
}

/// `nQ - S²`, clamped to zero when within rounding of it.
fn spread(sum: f64, sum_sq: f64, n: usize) -> f64 {
    let nq = n as f64 * sum_sq;
    let raw = nq - sum * sum;
    if raw <= DEGENERACY_RTOL * nq.abs() {
        0.0
    } else {
        raw
    }
}

pub fn assignment_stats(a: &Assignment, delta: &EffectMatrix) -> Result<PairStats, SolveError> {
    a.validate(delta)?;
    Ok(PairStats::from_effects(&a.effects(delta)?))
}

/// `Z = (S/√n) / σ̂`, with signed infinities for degenerate selections.
pub fn z_statistic(stats: &PairStats) -> Result<f64, SolveError> {
    if stats.n < 2 {
        return Err(SolveError::TooFewPairs(stats.n));
    }
    if stats.degenerate {
        return Ok(if stats.sum > 0.0 {
            f64::INFINITY
        } else if stats.sum < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        });
    }
    Ok(stats.sum / (stats.n as f64).sqrt() / stats.sigma_hat)
}

/// Both roots of `(nγ²/(n+γ²))·Q = S²`, i.e. `γ = ±√(nS²/(nQ − S²))`.
pub fn gamma_roots(sum: f64, sum_sq: f64, n: usize) -> Result<(f64, f64), SolveError> {
    let spread = spread(sum, sum_sq, n);
    if spread == 0.0 {
        return Err(SolveError::InfiniteRoot);
    }
    let root = (n as f64 * sum * sum / spread).sqrt();
    Ok((-root, root))
}

/// Upper-tail area of the standard normal distribution, `P(X > z)`.
pub fn normal_upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// `(p_min, p_max) = (tail(z_max), tail(z_min))`.
pub fn p_values(z_max: f64, z_min: f64) -> Result<(f64, f64), SolveError> {
    if z_min > z_max {
        return Err(SolveError::UnorderedZ { z_min, z_max });
    }
    Ok((normal_upper_tail(z_max), normal_upper_tail(z_min)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Robustness {
    AbsoluteRobust,
    AlphaRobust,
    NotRobust,
}

impl Robustness {
    pub fn as_str(self) -> &'static str {
        match self {
            Robustness::AbsoluteRobust => "absolute_robust",
            Robustness::AlphaRobust => "alpha_robust",
            Robustness::NotRobust => "not_robust",
        }
    }
}

pub fn classify_robustness(p_min: f64, p_max: f64, alpha: f64) -> Robustness {
    let gap = (p_max - p_min).abs();
    if gap <= P_EQUALITY_TOL {
        Robustness::AbsoluteRobust
    } else if gap <= alpha {
        Robustness::AlphaRobust
    } else {
        Robustness::NotRobust
    }
}

/// How far a statistic sits above the critical value at level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub z_crit: f64,
    pub absolute_margin: f64,
    /// `absolute_margin / z`; absent when `z` is zero or infinite.
    pub relative_margin: Option<f64>,
}

/// Critical value `z` with `normal_upper_tail(z) = alpha`, by bisection.
pub fn critical_value(alpha: f64) -> Result<f64, SolveError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SolveError::InvalidAlpha(alpha));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if normal_upper_tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn robustness_margin(z: f64, alpha: f64) -> Result<Margin, SolveError> {
    let z_crit = critical_value(alpha)?;
    let absolute_margin = z - z_crit;
    let relative_margin = (z != 0.0 && z.is_finite()).then(|| absolute_margin / z);
    Ok(Margin {
        z_crit,
        absolute_margin,
        relative_margin,
    })
}

/// Serde adapter for extended reals: infinities travel as `"inf"` / `"-inf"`.
pub mod ext_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else if *x == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!(
                "expected number, \"inf\" or \"-inf\", got {t:?}"
            ))),
        }
    }

    /// Renders for CSV / text output.
    pub fn format(x: f64) -> String {
        if x == f64::INFINITY {
            "inf".into()
        } else if x == f64::NEG_INFINITY {
            "-inf".into()
        } else {
            format!("{x}")
        }
    }
}
