//! Reduction of raw detector counts to outcome probabilities.
//!
//! Counts are Poisson, so a background-subtracted count `g - b` carries
//! `sigma² = g + b`. The black run is normalised by the net P1+P2 total of
//! the transparent run (equal exposure), which leaves absorption in the
//! object as the remainder.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::estimate::{hypot_all, Estimate};
use crate::outcome::{ObjectKind, OutcomeProbabilities, ProbabilityTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RunConfig {
    TransparentRun,
    BlackRun,
    BackgroundRun,
}

impl RunConfig {
    pub const ALL: [RunConfig; 3] = [
        RunConfig::TransparentRun,
        RunConfig::BlackRun,
        RunConfig::BackgroundRun,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RunConfig::TransparentRun => "transparent",
            RunConfig::BlackRun => "black",
            RunConfig::BackgroundRun => "background",
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transparent" => Ok(RunConfig::TransparentRun),
            "black" => Ok(RunConfig::BlackRun),
            "background" => Ok(RunConfig::BackgroundRun),
            other => Err(Error::InvalidArgument(format!("unknown config `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Detector {
    P1,
    P2,
    /// The detector that forms the black object.
    D,
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P1" => Ok(Detector::P1),
            "P2" => Ok(Detector::P2),
            "D" => Ok(Detector::D),
            other => Err(Error::InvalidArgument(format!(
                "unknown detector `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::P1 => "P1",
            Detector::P2 => "P2",
            Detector::D => "D",
        })
    }
}

/// Raw counts of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRecord {
    pub config: RunConfig,
    pub p1: u64,
    pub p2: u64,
    /// Present exactly for black and background runs.
    pub d: Option<u64>,
}

impl CountRecord {
    pub fn new(config: RunConfig, p1: u64, p2: u64, d: Option<u64>) -> Result<Self> {
        let wants_d = config != RunConfig::TransparentRun;
        if wants_d != d.is_some() {
            return Err(Error::InvalidArgument(format!(
                "{config} run {} a D count",
                if wants_d { "requires" } else { "cannot have" }
            )));
        }
        Ok(Self { config, p1, p2, d })
    }

    /// Multiplies every count by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            config: self.config,
            p1: self.p1 * k,
            p2: self.p2 * k,
            d: self.d.map(|d| d * k),
        }
    }
}

/// A background-subtracted count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetCounts {
    pub value: f64,
    pub sigma: f64,
}

impl NetCounts {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.sigma)
    }

    /// Negative by more than three standard deviations.
    pub fn is_suspicious(&self) -> bool {
        self.value < -3.0 * self.sigma
    }

    fn subtract(gross: u64, background: u64, scale: f64) -> Self {
        let (g, b) = (gross as f64, background as f64);
        Self {
            value: g - scale * b,
            sigma: (g + scale * scale * b).sqrt(),
        }
    }

    fn sum(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            sigma: self.sigma.hypot(other.sigma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetRecord {
    pub config: RunConfig,
    pub p1: NetCounts,
    pub p2: NetCounts,
    pub d: Option<NetCounts>,
}

impl NetRecord {
    /// Net P1 + P2.
    pub fn exit_total(&self) -> NetCounts {
        self.p1.sum(self.p2)
    }
}

/// Per-detector `gross - background` with Poisson sigmas.
pub fn subtract_background(gross: &CountRecord, background: &CountRecord) -> Result<NetRecord> {
    subtract_background_scaled(gross, background, 1.0)
}

/// As [`subtract_background`], with the background counts multiplied by
/// `scale` (ratio of signal to background live time).
pub fn subtract_background_scaled(
    gross: &CountRecord,
    background: &CountRecord,
    scale: f64,
) -> Result<NetRecord> {
    if gross.config == RunConfig::BackgroundRun {
        return Err(Error::InvalidArgument(
            "cannot subtract background from a background run".into(),
        ));
    }
    if background.config != RunConfig::BackgroundRun {
        return Err(Error::InvalidArgument(format!(
            "expected a background run, got {}",
            background.config
        )));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid background scale {scale}"
        )));
    }
    let d = match (gross.d, background.d) {
        (Some(g), Some(b)) => Some(NetCounts::subtract(g, b, scale)),
        _ => None,
    };
    Ok(NetRecord {
        config: gross.config,
        p1: NetCounts::subtract(gross.p1, background.p1, scale),
        p2: NetCounts::subtract(gross.p2, background.p2, scale),
        d,
    })
}

/// How sigmas of count ratios are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Propagation {
    /// Numerator and denominator treated as independent.
    #[default]
    Uncorrelated,
    /// Accounts for the numerator being part of the denominator; for black
    /// rows `p_iii = 1 - (P1 + P2)/total` is propagated directly.
    Exact,
}

/// Sigma of `n / total` for independent `n` and `total`.
fn ratio_sigma(n: NetCounts, total: NetCounts) -> f64 {
    let t = total.value;
    hypot_all(&[n.sigma / t, n.value * total.sigma / (t * t)])
}

/// Transparent row from net P1 and P2.
pub fn probabilities_transparent(
    p1: NetCounts,
    p2: NetCounts,
    propagation: Propagation,
) -> Result<OutcomeProbabilities> {
    let total = p1.sum(p2);
    if total.value <= 0.0 {
        return Err(Error::DegenerateData(
            "transparent run has no net counts at P1 and P2".into(),
        ));
    }
    let t = total.value;
    let (s_i, s_ii) = match propagation {
        Propagation::Uncorrelated => (ratio_sigma(p1, total), ratio_sigma(p2, total)),
        Propagation::Exact => {
            // d(p1/(p1+p2)) = (p2 dp1 - p1 dp2) / t²
            let s = hypot_all(&[p2.value * p1.sigma, p1.value * p2.sigma]) / (t * t);
            (s, s)
        }
    };
    let p_i = (p1.value / t).clamp(0.0, 1.0);
    OutcomeProbabilities::new(
        ObjectKind::Transparent,
        Estimate::new(p_i, s_i),
        Estimate::new(1.0 - p_i, s_ii),
        None,
    )
}

/// Black row from net P1 and P2 of the black run, normalised by `total`,
/// the net P1+P2 of the matched transparent run.
pub fn probabilities_black(
    p1: NetCounts,
    p2: NetCounts,
    total: NetCounts,
    propagation: Propagation,
) -> Result<OutcomeProbabilities> {
    if total.value <= 0.0 {
        return Err(Error::DegenerateData(
            "normalising total must be positive".into(),
        ));
    }
    let t = total.value;
    let p_i = Estimate::new(p1.value / t, ratio_sigma(p1, total));
    let p_ii = Estimate::new(p2.value / t, ratio_sigma(p2, total));
    let p_iii_value = 1.0 - p_i.value - p_ii.value;
    let p_iii_sigma = match propagation {
        Propagation::Uncorrelated => p_i.sigma.hypot(p_ii.sigma),
        Propagation::Exact => ratio_sigma(p1.sum(p2), total),
    };
    if p_iii_value < -3.0 * p_iii_sigma {
        return Err(Error::InconsistentExposure {
            value: p_iii_value,
            sigma: p_iii_sigma,
        });
    }
    let clamp = |e: Estimate| Estimate::new(e.value.clamp(0.0, 1.0), e.sigma);
    let (p_i, p_ii) = (clamp(p_i), clamp(p_ii));
    // keep the row normalised after clamping
    let p_iii = Estimate::new((1.0 - p_i.value - p_ii.value).max(0.0), p_iii_sigma);
    let row = OutcomeProbabilities {
        object: ObjectKind::Black,
        p_i,
        p_ii,
        p_iii: Some(p_iii),
    };
    if row.validate().is_err() {
        return Err(Error::InconsistentExposure {
            value: p_iii_value,
            sigma: p_iii_sigma,
        });
    }
    Ok(row)
}

/// Comparison of observed net counts in the object detector with the
/// number expected from the absorption probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub predicted: Estimate,
    pub observed: Estimate,
    /// `(observed - predicted) / sqrt(σ_obs² + σ_pred²)`.
    pub pull: f64,
}

impl ConsistencyReport {
    pub const PULL_LIMIT: f64 = 3.0;

    pub fn is_consistent(&self) -> bool {
        self.pull.abs() <= Self::PULL_LIMIT
    }
}

/// Predicted object-detector counts `p_iii · total · efficiency` against the
/// observed net counts.
pub fn consistency_check_object_detector(
    net_d: NetCounts,
    p_iii: Estimate,
    total: NetCounts,
    efficiency: f64,
) -> Result<ConsistencyReport> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "efficiency must lie in (0,1], got {efficiency}"
        )));
    }
    let value = p_iii.value * total.value * efficiency;
    let sigma = efficiency * hypot_all(&[p_iii.sigma * total.value, p_iii.value * total.sigma]);
    let predicted = Estimate::new(value, sigma);
    let observed = net_d.estimate();
    let combined = observed.sigma.hypot(predicted.sigma);
    let diff = observed.value - predicted.value;
    let pull = if combined > 0.0 {
        diff / combined
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(ConsistencyReport {
        predicted,
        observed,
        pull,
    })
}

/// Counts of all runs, keyed by run configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountTable {
    runs: BTreeMap<RunConfig, CountRecord>,
}

impl CountTable {
    pub fn from_records(records: impl IntoIterator<Item = CountRecord>) -> Result<Self> {
        let mut runs = BTreeMap::new();
        for r in records {
            if runs.insert(r.config, r).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate {} run",
                    r.config
                )));
            }
        }
        Ok(Self { runs })
    }

    pub fn get(&self, config: RunConfig) -> Result<&CountRecord> {
        self.runs
            .get(&config)
            .ok_or_else(|| Error::Missing(format!("{config} rows")))
    }

    pub fn records(&self) -> impl Iterator<Item = &CountRecord> {
        self.runs.values()
    }

    /// Multiplies every count in every run by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            runs: self.runs.iter().map(|(c, r)| (*c, r.scaled(k))).collect(),
        }
    }

    /// Parses `detector,config,counts` rows after a mandatory header row.
    /// Lines starting with `#` and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header_seen = false;
        let mut cells: BTreeMap<(RunConfig, Detector), u64> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                if fields != ["detector", "config", "counts"] {
                    return Err(Error::parse(
                        line_no,
                        format!("expected header `detector,config,counts`, got `{line}`"),
                    ));
                }
                header_seen = true;
                continue;
            }
            let [detector, config, counts] = fields[..] else {
                return Err(Error::parse(
                    line_no,
                    format!("expected 3 fields, got {}", fields.len()),
                ));
            };
            let detector: Detector = detector
                .parse()
                .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
            let config: RunConfig = config
                .parse()
                .map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
            let counts: u64 = counts.parse().map_err(|_| {
                Error::parse(
                    line_no,
                    format!("counts must be a non-negative integer, got `{counts}`"),
                )
            })?;
            if detector == Detector::D && config == RunConfig::TransparentRun {
                return Err(Error::parse(line_no, "transparent run has no D detector"));
            }
            if cells.insert((config, detector), counts).is_some() {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate row for {detector},{config}"),
                ));
            }
        }
        if !header_seen {
            return Err(Error::parse(1, "missing header `detector,config,counts`"));
        }
        let mut records = Vec::new();
        for config in RunConfig::ALL {
            let present: Vec<Detector> = [Detector::P1, Detector::P2, Detector::D]
                .into_iter()
                .filter(|d| cells.contains_key(&(config, *d)))
                .collect();
            if present.is_empty() {
                continue;
            }
            let cell = |d: Detector| {
                cells
                    .get(&(config, d))
                    .copied()
                    .ok_or_else(|| Error::Missing(format!("{d} row for {config} run")))
            };
            let d = match config {
                RunConfig::TransparentRun => None,
                _ => Some(cell(Detector::D)?),
            };
            records.push(CountRecord::new(
                config,
                cell(Detector::P1)?,
                cell(Detector::P2)?,
                d,
            )?);
        }
        Self::from_records(records)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("detector,config,counts\n");
        for r in self.records() {
            out.push_str(&format!("P1,{},{}\n", r.config, r.p1));
            out.push_str(&format!("P2,{},{}\n", r.config, r.p2));
            if let Some(d) = r.d {
                out.push_str(&format!("D,{},{}\n", r.config, d));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    pub propagation: Propagation,
    /// Efficiency of the exit detectors P1 and P2; net counts are divided
    /// by it. 1 means no correction.
    pub exit_detector_efficiency: f64,
    /// Live-time ratio applied to background counts.
    pub background_scale: f64,
    /// Efficiency of the object detector D, used only for the consistency
    /// check.
    pub object_detector_efficiency: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self {
            propagation: Propagation::Uncorrelated,
            exit_detector_efficiency: 1.0,
            background_scale: 1.0,
            object_detector_efficiency: 0.65,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub transparent_net: NetRecord,
    pub black_net: NetRecord,
    pub table: ProbabilityTable,
    /// Present when the black run carries D counts.
    pub consistency: Option<ConsistencyReport>,
}

/// Full count-to-probability pipeline.
pub fn reduce(counts: &CountTable, options: &ReduceOptions) -> Result<Reduction> {
    let eff = options.exit_detector_efficiency;
    if !(eff > 0.0 && eff <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exit detector efficiency must lie in (0,1], got {eff}"
        )));
    }
    let background = counts.get(RunConfig::BackgroundRun)?;
    let transparent = counts.get(RunConfig::TransparentRun)?;
    let black = counts.get(RunConfig::BlackRun)?;

    let correct = |n: NetCounts| NetCounts {
        value: n.value / eff,
        sigma: n.sigma / eff,
    };
    let mut transparent_net =
        subtract_background_scaled(transparent, background, options.background_scale)?;
    let mut black_net = subtract_background_scaled(black, background, options.background_scale)?;
    for net in [&mut transparent_net, &mut black_net] {
        net.p1 = correct(net.p1);
        net.p2 = correct(net.p2);
    }

    let trans_row =
        probabilities_transparent(transparent_net.p1, transparent_net.p2, options.propagation)?;
    let total = transparent_net.exit_total();
    let black_row = probabilities_black(black_net.p1, black_net.p2, total, options.propagation)?;
    let consistency = match black_net.d {
        Some(d) => Some(consistency_check_object_detector(
            d,
            black_row.p_iii.expect("black row"),
            total,
            options.object_detector_efficiency,
        )?),
        None => None,
    };
    Ok(Reduction {
        transparent_net,
        black_net,
        table: ProbabilityTable::new(black_row, trans_row)?,
        consistency,
    })
}
