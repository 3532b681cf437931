//! Scan of the attenuator transmittance under a choice of objective.

use rayon::prelude::*;

use super::{probability_table, InterferometerParams};
use crate::protocol::enrichment_curve;
use crate::{Error, Result};

/// Transmittance window around the 16% design point.
pub const DESIGN_WINDOW: (f64, f64) = (0.10, 0.25);

/// Figure of merit maximised over the transmittance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Fraction of black objects in group ii for a black prior `f`.
    EnrichmentAt { f: f64 },
    /// `p_black(ii) / p_trans(ii)`.
    LikelihoodRatio,
    /// Probability that a single test classifies correctly at prior `f`:
    /// black objects count as correct in groups ii and iii, transparent ones
    /// in group i.
    CorrectClassification { f: f64 },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::EnrichmentAt { .. } => "enrichment",
            Objective::LikelihoodRatio => "likelihood",
            Objective::CorrectClassification { .. } => "correct",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Objective::EnrichmentAt { f } | Objective::CorrectClassification { f }
                if !(0.0..=1.0).contains(&f) =>
            {
                Err(Error::InvalidArgument(format!(
                    "prior f must lie in [0,1], got {f}"
                )))
            }
            _ => Ok(()),
        }
    }

    fn evaluate(&self, params: &InterferometerParams) -> ObjectiveValue {
        let table = match probability_table(params) {
            Ok(t) => t,
            Err(e) => return ObjectiveValue::Undefined(e.to_string()),
        };
        let black = table.black.values();
        let trans = table.transparent.values();
        match *self {
            Objective::EnrichmentAt { f } => {
                match enrichment_curve(&table, &[f]).map(|c| c[0].f_black_in_ii) {
                    Ok(Some(e)) => ObjectiveValue::Finite(e.value),
                    Ok(None) => ObjectiveValue::Undefined("zero denominator".into()),
                    Err(e) => ObjectiveValue::Undefined(e.to_string()),
                }
            }
            Objective::LikelihoodRatio => match (black[1], trans[1]) {
                (b, t) if t > 0.0 => ObjectiveValue::Finite(b / t),
                (b, _) if b > 0.0 => ObjectiveValue::Unbounded,
                _ => ObjectiveValue::Undefined("both group-ii probabilities are zero".into()),
            },
            Objective::CorrectClassification { f } => {
                ObjectiveValue::Finite(f * (black[1] + black[2]) + (1.0 - f) * trans[0])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveValue {
    Finite(f64),
    /// Grows without bound (zero false-positive rate).
    Unbounded,
    /// Not defined at this grid point; excluded from the argmax.
    Undefined(String),
}

impl ObjectiveValue {
    fn rank(&self) -> Option<(u8, f64)> {
        match self {
            ObjectiveValue::Finite(v) if v.is_finite() => Some((0, *v)),
            ObjectiveValue::Finite(_) => None,
            ObjectiveValue::Unbounded => Some((1, 0.0)),
            ObjectiveValue::Undefined(_) => None,
        }
    }
}

/// Uniform grid `t_k = k / points`, `k = 1..=points`, covering `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttenuationGrid {
    pub points: usize,
}

impl Default for AttenuationGrid {
    fn default() -> Self {
        Self { points: 512 }
    }
}

impl AttenuationGrid {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.points).map(move |k| k as f64 / self.points as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub t: f64,
    pub value: ObjectiveValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationScan {
    pub objective: Objective,
    pub points: Vec<ScanPoint>,
    /// Index into `points` of the argmax, if any point was defined.
    pub optimum: Option<usize>,
}

impl AttenuationScan {
    pub fn optimum_point(&self) -> Option<&ScanPoint> {
        self.optimum.map(|i| &self.points[i])
    }

    /// Whether the optimum lies inside [`DESIGN_WINDOW`].
    pub fn optimum_in_design_window(&self) -> bool {
        self.optimum_point()
            .is_some_and(|p| (DESIGN_WINDOW.0..=DESIGN_WINDOW.1).contains(&p.t))
    }

    pub fn undefined_count(&self) -> usize {
        self.points
            .iter()
            .filter(|p| matches!(p.value, ObjectiveValue::Undefined(_)))
            .count()
    }
}

/// Evaluates `objective` on every grid transmittance and returns the
/// argmax. Unbounded values beat finite ones; ties go to the smaller `t`.
pub fn optimize_attenuation(
    params: &InterferometerParams,
    objective: Objective,
    grid: AttenuationGrid,
) -> Result<AttenuationScan> {
    params.validate()?;
    objective.validate()?;
    if grid.points == 0 {
        return Err(Error::InvalidArgument("attenuation grid is empty".into()));
    }
    let ts: Vec<f64> = grid.values().collect();
    let points: Vec<ScanPoint> = ts
        .par_iter()
        .map(|&t| ScanPoint {
            t,
            value: objective.evaluate(&params.with_attenuation(t)),
        })
        .collect();

    let mut optimum: Option<(usize, (u8, f64))> = None;
    for (i, p) in points.iter().enumerate() {
        if let Some(rank) = p.value.rank() {
            // strict comparison keeps the earliest (smallest t) on ties
            if optimum.is_none_or(|(_, best)| rank > best) {
                optimum = Some((i, rank));
            }
        }
    }
    Ok(AttenuationScan {
        objective,
        points,
        optimum: optimum.map(|(i, _)| i),
    })
}
