//! Seeded ensemble simulation of the classification strategies.
//!
//! Randomness is counter based: object `j` draws from ChaCha8 stream `j`
//! under the master seed, and its `k`-th test consumes the `k`-th draw of
//! that stream. Results therefore do not depend on how objects are
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kv::KvDocument;
use crate::outcome::{Group, ObjectKind, ProbabilityTable};
use crate::protocol::{strategy_fractions, Strategy};
use crate::{Error, Result};

/// Retests allowed per object before it is reported as capped.
pub const DEFAULT_RETEST_CAP: u64 = 10_000;

const COMPOSITION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// The first `round(f·n)` objects are black.
    ExactCount,
    /// Each object is black with probability `f`.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_objects: u64,
    pub f_black: f64,
    pub composition: Composition,
}

impl EnsembleSpec {
    pub fn new(n_objects: u64, f_black: f64) -> Self {
        Self {
            n_objects,
            f_black,
            composition: Composition::ExactCount,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_objects == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one object".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.f_black) {
            return Err(Error::InvalidArgument(format!(
                "black fraction must lie in [0,1], got {}",
                self.f_black
            )));
        }
        Ok(())
    }
}

fn kind_index(kind: ObjectKind) -> usize {
    match kind {
        ObjectKind::Black => 0,
        ObjectKind::Transparent => 1,
    }
}

/// Final group composition of a simulated ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnsembleReport {
    /// `counts[kind][group]`, kinds ordered black, transparent.
    counts: [[u64; 3]; 2],
    pub neutrons_used: u64,
    /// Objects that hit the retest cap; they stay in group i.
    pub capped_objects: u64,
}

impl EnsembleReport {
    pub fn count(&self, kind: ObjectKind, group: Group) -> u64 {
        self.counts[kind_index(kind)][group.index()]
    }

    pub fn kind_total(&self, kind: ObjectKind) -> u64 {
        self.counts[kind_index(kind)].iter().sum()
    }

    pub fn group_total(&self, group: Group) -> u64 {
        self.counts[0][group.index()] + self.counts[1][group.index()]
    }

    pub fn n_objects(&self) -> u64 {
        self.kind_total(ObjectKind::Black) + self.kind_total(ObjectKind::Transparent)
    }

    /// Interactions: black objects that absorbed a particle.
    pub fn absorptions(&self) -> u64 {
        self.count(ObjectKind::Black, Group::III)
    }

    fn merge(mut self, other: Self) -> Self {
        for k in 0..2 {
            for g in 0..3 {
                self.counts[k][g] += other.counts[k][g];
            }
        }
        self.neutrons_used += other.neutrons_used;
        self.capped_objects += other.capped_objects;
        self
    }

    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push_u64("n_objects", self.n_objects());
        for kind in ObjectKind::ALL {
            for group in Group::ALL {
                doc.push_u64(&format!("{kind}_{group}"), self.count(kind, group));
            }
        }
        doc.push_u64("neutrons_used", self.neutrons_used);
        doc.push_u64("absorptions", self.absorptions());
        doc.push_u64("capped_objects", self.capped_objects);
        doc
    }

    /// Per-group breakdown, `group,black,transparent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,black,transparent\n");
        for g in Group::ALL {
            out.push_str(&format!(
                "{g},{},{}\n",
                self.count(ObjectKind::Black, g),
                self.count(ObjectKind::Transparent, g)
            ));
        }
        out
    }
}

/// One test of `object`: samples the outcome distribution with a single
/// uniform draw.
pub fn run_single_test<R: Rng + ?Sized>(
    object: ObjectKind,
    table: &ProbabilityTable,
    rng: &mut R,
) -> Group {
    let [p_i, p_ii, _] = table.row(object).values();
    let u: f64 = rng.random();
    if u < p_i {
        Group::I
    } else if u < p_i + p_ii {
        Group::II
    } else if object == ObjectKind::Black {
        Group::III
    } else {
        // rounding slack in a transparent row never means absorption
        Group::II
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub retest_cap: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            retest_cap: DEFAULT_RETEST_CAP,
        }
    }
}

fn object_kind(spec: &EnsembleSpec, composition_rng: &ChaCha8Rng, index: u64) -> ObjectKind {
    let black = match spec.composition {
        Composition::ExactCount => index < (spec.f_black * spec.n_objects as f64).round() as u64,
        Composition::Binomial => {
            let mut rng = composition_rng.clone();
            rng.set_stream(index);
            rng.random::<f64>() < spec.f_black
        }
    };
    if black {
        ObjectKind::Black
    } else {
        ObjectKind::Transparent
    }
}

/// Final group of one object and the number of tests it took.
fn simulate_object(
    kind: ObjectKind,
    strategy: Strategy,
    table: &ProbabilityTable,
    rng: &mut ChaCha8Rng,
    cap: u64,
) -> (Group, u64, bool) {
    let mut group = run_single_test(kind, table, rng);
    let mut tests = 1;
    match strategy {
        Strategy::SingleTest => {}
        Strategy::RepeatGroupI => {
            while group == Group::I {
                if tests > cap {
                    return (group, tests, true);
                }
                group = run_single_test(kind, table, rng);
                tests += 1;
            }
        }
        Strategy::PurifyGroupII(n) => {
            while group == Group::II && tests < u64::from(n) {
                group = run_single_test(kind, table, rng);
                tests += 1;
            }
        }
    }
    (group, tests, false)
}

pub fn run_strategy(
    spec: &EnsembleSpec,
    strategy: Strategy,
    table: &ProbabilityTable,
    seed: u64,
) -> Result<EnsembleReport> {
    run_strategy_with(spec, strategy, table, seed, &RunOptions::default())
}

/// Simulates every object of the ensemble under `strategy`. The result is
/// a function of the arguments only.
pub fn run_strategy_with(
    spec: &EnsembleSpec,
    strategy: Strategy,
    table: &ProbabilityTable,
    seed: u64,
    options: &RunOptions,
) -> Result<EnsembleReport> {
    spec.validate()?;
    strategy.validate()?;
    let tests_rng = ChaCha8Rng::seed_from_u64(seed);
    let composition_rng = ChaCha8Rng::seed_from_u64(seed ^ COMPOSITION_SALT);
    let report = (0..spec.n_objects)
        .into_par_iter()
        .fold(EnsembleReport::default, |mut acc, index| {
            let kind = object_kind(spec, &composition_rng, index);
            let mut rng = tests_rng.clone();
            rng.set_stream(index);
            let (group, tests, capped) =
                simulate_object(kind, strategy, table, &mut rng, options.retest_cap);
            acc.counts[kind_index(kind)][group.index()] += 1;
            acc.neutrons_used += tests;
            acc.capped_objects += u64::from(capped);
            acc
        })
        .reduce(EnsembleReport::default, EnsembleReport::merge);
    Ok(report)
}

/// One empirical-versus-closed-form comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub quantity: String,
    pub empirical: f64,
    pub expected: f64,
    /// Sampling standard deviation of the empirical value.
    pub sigma: f64,
    pub pull: f64,
}

fn comparison(quantity: String, empirical: f64, expected: f64, sigma: f64) -> Comparison {
    let diff = empirical - expected;
    let pull = if sigma > 0.0 {
        diff / sigma
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Comparison {
        quantity,
        empirical,
        expected,
        sigma,
        pull,
    }
}

fn binomial(quantity: String, hits: u64, trials: u64, p: f64) -> Comparison {
    let n = trials as f64;
    comparison(quantity, hits as f64 / n, p, (p * (1.0 - p) / n).sqrt())
}

/// Mean and variance of the number of tests per object.
fn test_count_moments(strategy: Strategy, row: &crate::OutcomeProbabilities) -> (f64, f64) {
    let [p_i, p_ii, _] = row.values();
    match strategy {
        Strategy::SingleTest => (1.0, 0.0),
        Strategy::RepeatGroupI => {
            let q = 1.0 - p_i;
            (1.0 / q, p_i / (q * q))
        }
        Strategy::PurifyGroupII(n) => {
            // P(T >= k) = p_ii^(k-1) for k = 1..=N
            let (mut mean, mut second) = (0.0, 0.0);
            for k in 1..=n {
                let tail = p_ii.powi(k as i32 - 1);
                mean += tail;
                second += f64::from(2 * k - 1) * tail;
            }
            (mean, second - mean * mean)
        }
    }
}

/// Pulls of every tracked fraction of `report` against the closed forms of
/// [`strategy_fractions`]: the group fractions of each object kind, the
/// black purity of group ii, and the mean number of tests per object.
pub fn empirical_vs_analytic(
    report: &EnsembleReport,
    strategy: Strategy,
    table: &ProbabilityTable,
) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    let mut expected_ii = [0.0; 2];
    let mut expected_tests = 0.0;
    let mut tests_var = 0.0;
    for kind in ObjectKind::ALL {
        let row = table.row(kind);
        let fractions = strategy_fractions(row, strategy)?;
        expected_ii[kind_index(kind)] = fractions.group(Group::II);
        let n = report.kind_total(kind);
        if n == 0 {
            continue;
        }
        for group in Group::ALL {
            out.push(binomial(
                format!("{kind}_in_{group}"),
                report.count(kind, group),
                n,
                fractions.group(group),
            ));
        }
        let (mean, var) = test_count_moments(strategy, row);
        expected_tests += n as f64 * mean;
        tests_var += n as f64 * var;
    }

    let n_ii = report.group_total(Group::II);
    if n_ii > 0 {
        let n = report.n_objects() as f64;
        let f = report.kind_total(ObjectKind::Black) as f64 / n;
        let black = f * expected_ii[0];
        let purity = black / (black + (1.0 - f) * expected_ii[1]);
        out.push(binomial(
            "black_purity_in_ii".into(),
            report.count(ObjectKind::Black, Group::II),
            n_ii,
            purity,
        ));
    }

    let n = report.n_objects() as f64;
    out.push(comparison(
        "tests_per_object".into(),
        report.neutrons_used as f64 / n,
        expected_tests / n,
        tests_var.sqrt() / n,
    ));
    Ok(out)
}
