//! Closed-form results for the classification strategies.
//!
//! Every test sends one particle through the interferometer with the
//! unknown object in the test path. Detection at P1 puts the object in
//! group i, detection at P2 in group ii, and absorption in the object puts
//! it in group iii.

use std::fmt;
use std::str::FromStr;

use crate::estimate::{hypot_all, Estimate};
use crate::outcome::{Group, ObjectKind, OutcomeProbabilities, ProbabilityTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One test per object.
    SingleTest,
    /// Objects landing in group i are retested until they leave it.
    RepeatGroupI,
    /// After the first test, group ii is retested `N - 1` more times;
    /// a retest that does not give P2 moves the object to the matching
    /// group.
    PurifyGroupII(u32),
}

impl Strategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::PurifyGroupII(0) => {
                Err(Error::InvalidArgument("purification needs N >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::SingleTest => f.write_str("single"),
            Strategy::RepeatGroupI => f.write_str("repeat"),
            Strategy::PurifyGroupII(n) => write!(f, "purify:{n}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Accepts `single`, `repeat` and `purify:N`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let strategy = match s {
            "single" => Strategy::SingleTest,
            "repeat" => Strategy::RepeatGroupI,
            _ => {
                let n = s
                    .strip_prefix("purify:")
                    .and_then(|n| n.parse::<u32>().ok())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "unknown strategy `{s}` (expected single, repeat or purify:N)"
                        ))
                    })?;
                Strategy::PurifyGroupII(n)
            }
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

/// Distribution of a single test's outcome over groups i, ii, iii.
pub fn single_test_distribution(table: &ProbabilityTable, object: ObjectKind) -> [f64; 3] {
    table.row(object).values()
}

/// Limits of retesting group i forever.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatLimit {
    /// Probability of ending in group ii.
    pub group_ii: f64,
    /// Probability of ending in group iii, `1 - group_ii` for a black object.
    pub group_iii: f64,
}

/// `p_ii · Σ p_iⁿ = p_ii / (1 - p_i)`.
pub fn repeat_group_i_limit(p_i: f64, p_ii: f64) -> Result<RepeatLimit> {
    if !(0.0..=1.0).contains(&p_i) || !(0.0..=1.0).contains(&p_ii) || p_i + p_ii > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= p_i, p_ii and p_i + p_ii <= 1, got {p_i}, {p_ii}"
        )));
    }
    if p_i >= 1.0 {
        return Err(Error::Divergence(
            "p_i = 1: objects never leave group i".into(),
        ));
    }
    let group_ii = p_ii / (1.0 - p_i);
    Ok(RepeatLimit {
        group_ii,
        group_iii: 1.0 - group_ii,
    })
}

/// [`repeat_group_i_limit`] with first-order propagation of the input sigmas.
pub fn repeat_group_i_limit_estimate(p_i: Estimate, p_ii: Estimate) -> Result<Estimate> {
    let limit = repeat_group_i_limit(p_i.value, p_ii.value)?;
    let q = 1.0 - p_i.value;
    let sigma = hypot_all(&[p_ii.value / (q * q) * p_i.sigma, p_ii.sigma / q]);
    Ok(Estimate::new(limit.group_ii, sigma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichmentPoint {
    pub f_original: f64,
    /// Fraction of black objects in group ii; `None` where undefined.
    pub f_black_in_ii: Option<Estimate>,
    /// Fraction of transparent objects in group i; `None` where undefined.
    pub f_trans_in_i: Option<Estimate>,
}

/// Share of class A in a group that receives A with probability `a` and B
/// with probability `b`, for an A prior `f`. Zero denominators at `f = 0`
/// and `f = 1` take the endpoint values 0 and 1; elsewhere they are
/// undefined.
fn mixture_share(f: f64, a: Estimate, b: Estimate) -> Option<Estimate> {
    let den = f * a.value + (1.0 - f) * b.value;
    if den <= 0.0 {
        return if f == 0.0 {
            Some(Estimate::exact(0.0))
        } else if f == 1.0 {
            Some(Estimate::exact(1.0))
        } else {
            None
        };
    }
    let value = f * a.value / den;
    let scale = f * (1.0 - f) / (den * den);
    let sigma = scale * hypot_all(&[b.value * a.sigma, a.value * b.sigma]);
    Some(Estimate::new(value, sigma))
}

/// Single-test enrichment of black objects in group ii and of transparent
/// objects in group i, as a function of the black fraction `f` of the
/// original ensemble. Probability sigmas are propagated at first order;
/// `f` is exact.
pub fn enrichment_curve(table: &ProbabilityTable, f_grid: &[f64]) -> Result<Vec<EnrichmentPoint>> {
    f_grid
        .iter()
        .map(|&f| {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!(
                    "f must lie in [0,1], got {f}"
                )));
            }
            Ok(EnrichmentPoint {
                f_original: f,
                f_black_in_ii: mixture_share(f, table.black.p_ii, table.transparent.p_ii),
                f_trans_in_i: mixture_share(1.0 - f, table.transparent.p_i, table.black.p_i),
            })
        })
        .collect()
}

/// Likelihood ratio that never leaks an infinity into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LikelihoodRatio {
    Finite(f64),
    /// Transparent objects can never reach the group.
    Unbounded,
}

impl LikelihoodRatio {
    pub fn finite(&self) -> Option<f64> {
        match self {
            LikelihoodRatio::Finite(r) => Some(*r),
            LikelihoodRatio::Unbounded => None,
        }
    }

    pub fn posterior_purity(&self, f_original: f64) -> Result<f64> {
        match self {
            LikelihoodRatio::Finite(r) => posterior_purity(f_original, *r),
            LikelihoodRatio::Unbounded if f_original > 0.0 => Ok(1.0),
            LikelihoodRatio::Unbounded => Ok(0.0),
        }
    }
}

impl fmt::Display for LikelihoodRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LikelihoodRatio::Finite(r) => write!(f, "{r}"),
            LikelihoodRatio::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Purification {
    /// How much likelier a black object is to remain in group ii than a
    /// transparent one after `N` tests.
    pub ratio: LikelihoodRatio,
    /// Fraction of the original black objects left in group ii.
    pub black_yield: f64,
}

/// Outcome of testing group ii `N` times in total.
pub fn purification(p_b_ii: f64, p_t_ii: f64, n: u32) -> Result<Purification> {
    if !(0.0..=1.0).contains(&p_b_ii) || !(0.0..=1.0).contains(&p_t_ii) {
        return Err(Error::InvalidArgument(format!(
            "probabilities must lie in [0,1], got {p_b_ii}, {p_t_ii}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("purification needs N >= 1".into()));
    }
    let ratio = match (p_b_ii, p_t_ii) {
        (b, t) if t > 0.0 => LikelihoodRatio::Finite((b / t).powi(n as i32)),
        (b, _) if b > 0.0 => LikelihoodRatio::Unbounded,
        _ => return Err(Error::UndefinedRatio),
    };
    Ok(Purification {
        ratio,
        black_yield: p_b_ii.powi(n as i32),
    })
}

/// Bayes update of a black prior `f` by a likelihood ratio.
pub fn posterior_purity(f_original: f64, ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_original) || !ratio.is_finite() || ratio < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need f in [0,1] and finite ratio >= 0, got {f_original}, {ratio}"
        )));
    }
    let num = f_original * ratio;
    let den = num + (1.0 - f_original);
    if den == 0.0 {
        // f = 1 and ratio = 0: no objects at all reach the group
        return Err(Error::InvalidArgument(
            "posterior undefined: empty group".into(),
        ));
    }
    Ok(num / den)
}

/// Mean number of particles spent per test when a test that registers at
/// neither exit is repeated.
///
/// With `retry` the exit detectors have efficiency `detector_efficiency`, a
/// particle that reached P1 or P2 but was not registered prompts another
/// particle, and the count is geometric: `1 / (1 - (1 - ε)(p_i + p_ii))`.
/// Without `retry` every test uses exactly one particle.
pub fn expected_neutrons_per_test(
    probs: &OutcomeProbabilities,
    detector_efficiency: f64,
    retry: bool,
) -> Result<f64> {
    if !(detector_efficiency > 0.0 && detector_efficiency <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "efficiency must lie in (0,1], got {detector_efficiency}"
        )));
    }
    if !retry {
        return Ok(1.0);
    }
    let p_undetected = (1.0 - detector_efficiency) * (probs.p_i.value + probs.p_ii.value);
    if p_undetected >= 1.0 {
        return Err(Error::Divergence("every particle goes unregistered".into()));
    }
    Ok(1.0 / (1.0 - p_undetected))
}

/// Closed-form end state of one object kind under a strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindFractions {
    /// Probability of ending in groups i, ii, iii.
    pub groups: [f64; 3],
    /// Mean number of tests per object.
    pub mean_tests: f64,
}

impl KindFractions {
    pub fn group(&self, g: Group) -> f64 {
        self.groups[g.index()]
    }
}

/// End-state fractions of an object with single-test row `row`.
pub fn strategy_fractions(row: &OutcomeProbabilities, strategy: Strategy) -> Result<KindFractions> {
    strategy.validate()?;
    let [p_i, p_ii, p_iii] = row.values();
    Ok(match strategy {
        Strategy::SingleTest => KindFractions {
            groups: [p_i, p_ii, p_iii],
            mean_tests: 1.0,
        },
        Strategy::RepeatGroupI => {
            let limit = repeat_group_i_limit(p_i, p_ii)?;
            let q = 1.0 - p_i;
            KindFractions {
                groups: [0.0, limit.group_ii, p_iii / q],
                mean_tests: 1.0 / q,
            }
        }
        Strategy::PurifyGroupII(n) => {
            // expected number of tests = Σ_{k<N} p_ii^k
            let tests: f64 = (0..n).map(|k| p_ii.powi(k as i32)).sum();
            KindFractions {
                groups: [p_i * tests, p_ii.powi(n as i32), p_iii * tests],
                mean_tests: tests,
            }
        }
    })
}

/// Fraction of black objects among those ending in group ii.
pub fn group_ii_purity(
    table: &ProbabilityTable,
    strategy: Strategy,
    f_original: f64,
) -> Result<f64> {
    let black = strategy_fractions(&table.black, strategy)?.group(Group::II);
    let trans = strategy_fractions(&table.transparent, strategy)?.group(Group::II);
    if trans == 0.0 {
        return LikelihoodRatio::Unbounded.posterior_purity(f_original);
    }
    posterior_purity(f_original, black / trans)
}
