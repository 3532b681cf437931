use std::fmt;
use std::str::FromStr;

use crate::{Error, Estimate, Result};

/// The two classes of test object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    /// Absorbs every particle present at the test position.
    Black,
    /// No amplitude or phase change.
    Transparent,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 2] = [ObjectKind::Black, ObjectKind::Transparent];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectKind::Black => "black",
            ObjectKind::Transparent => "transparent",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classification bin an object ends up in after a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    /// Particle detected at P1.
    I,
    /// Particle detected at P2.
    II,
    /// Particle absorbed in the object.
    III,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::I, Group::II, Group::III];

    pub fn index(self) -> usize {
        match self {
            Group::I => 0,
            Group::II => 1,
            Group::III => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::I => "i",
            Group::II => "ii",
            Group::III => "iii",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "black" => Ok(ObjectKind::Black),
            "transparent" => Ok(ObjectKind::Transparent),
            other => Err(Error::InvalidArgument(format!(
                "unknown object kind `{other}`"
            ))),
        }
    }
}

/// Probabilities of the three single-test outcomes for one object kind.
///
/// `p_iii` is present only for black objects; a transparent object never
/// absorbs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbabilities {
    pub object: ObjectKind,
    pub p_i: Estimate,
    pub p_ii: Estimate,
    pub p_iii: Option<Estimate>,
}

const SUM_TOLERANCE: f64 = 1e-9;

impl OutcomeProbabilities {
    /// Builds a row and checks range and normalisation.
    pub fn new(
        object: ObjectKind,
        p_i: Estimate,
        p_ii: Estimate,
        p_iii: Option<Estimate>,
    ) -> Result<Self> {
        let row = Self {
            object,
            p_i,
            p_ii,
            p_iii,
        };
        row.validate()?;
        Ok(row)
    }

    /// Exact (zero-sigma) black row.
    pub fn black(p_i: f64, p_ii: f64, p_iii: f64) -> Result<Self> {
        Self::new(
            ObjectKind::Black,
            Estimate::exact(p_i),
            Estimate::exact(p_ii),
            Some(Estimate::exact(p_iii)),
        )
    }

    /// Exact (zero-sigma) transparent row.
    pub fn transparent(p_i: f64, p_ii: f64) -> Result<Self> {
        Self::new(
            ObjectKind::Transparent,
            Estimate::exact(p_i),
            Estimate::exact(p_ii),
            None,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.values();
        if values
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "{} probabilities out of [0,1]: {values:?}",
                self.object
            )));
        }
        match (self.object, self.p_iii) {
            (ObjectKind::Transparent, Some(_)) => {
                return Err(Error::InvalidArgument(
                    "transparent row cannot carry an absorption probability".into(),
                ))
            }
            (ObjectKind::Black, None) => {
                return Err(Error::InvalidArgument(
                    "black row requires an absorption probability".into(),
                ))
            }
            _ => {}
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "{} probabilities sum to {sum}, expected 1",
                self.object
            )));
        }
        Ok(())
    }

    /// `[p_i, p_ii, p_iii]`, with `p_iii = 0` for transparent rows.
    pub fn values(&self) -> [f64; 3] {
        [
            self.p_i.value,
            self.p_ii.value,
            self.p_iii.map_or(0.0, |p| p.value),
        ]
    }

    pub fn get(&self, group: Group) -> Estimate {
        match group {
            Group::I => self.p_i,
            Group::II => self.p_ii,
            Group::III => self.p_iii.unwrap_or_default(),
        }
    }
}

/// Black and transparent rows together; the input to every strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityTable {
    pub black: OutcomeProbabilities,
    pub transparent: OutcomeProbabilities,
}

impl ProbabilityTable {
    pub fn new(black: OutcomeProbabilities, transparent: OutcomeProbabilities) -> Result<Self> {
        if black.object != ObjectKind::Black || transparent.object != ObjectKind::Transparent {
            return Err(Error::InvalidArgument(
                "probability table needs one black and one transparent row".into(),
            ));
        }
        black.validate()?;
        transparent.validate()?;
        Ok(Self { black, transparent })
    }

    pub fn row(&self, object: ObjectKind) -> &OutcomeProbabilities {
        match object {
            ObjectKind::Black => &self.black,
            ObjectKind::Transparent => &self.transparent,
        }
    }

    /// Ideal Mach-Zehnder values: black (1/4, 1/4, 1/2), transparent (1, 0).
    pub fn ideal() -> Self {
        Self {
            black: OutcomeProbabilities::black(0.25, 0.25, 0.5).expect("valid"),
            transparent: OutcomeProbabilities::transparent(1.0, 0.0).expect("valid"),
        }
    }
}

impl ProbabilityTable {
    /// Key=value form: `black_p_i`, `black_p_i_sigma`, …, `trans_p_ii_sigma`.
    pub fn to_kv(&self) -> crate::kv::KvDocument {
        let mut doc = crate::kv::KvDocument::new();
        for (prefix, row) in [("black", &self.black), ("trans", &self.transparent)] {
            for g in Group::ALL {
                if row.object == ObjectKind::Transparent && g == Group::III {
                    continue;
                }
                let e = row.get(g);
                doc.push_f64(&format!("{prefix}_p_{g}"), e.value);
                doc.push_f64(&format!("{prefix}_p_{g}_sigma"), e.sigma);
            }
        }
        doc
    }

    /// Reads [`ProbabilityTable::to_kv`] output; sigmas default to zero.
    pub fn from_kv(doc: &crate::kv::KvDocument) -> Result<Self> {
        let est = |key: &str| -> Result<Estimate> {
            Ok(Estimate::new(
                doc.require_f64(key)?,
                doc.get_f64(&format!("{key}_sigma"))?.unwrap_or(0.0),
            ))
        };
        Self::new(
            OutcomeProbabilities::new(
                ObjectKind::Black,
                est("black_p_i")?,
                est("black_p_ii")?,
                Some(est("black_p_iii")?),
            )?,
            OutcomeProbabilities::new(
                ObjectKind::Transparent,
                est("trans_p_i")?,
                est("trans_p_ii")?,
                None,
            )?,
        )
    }
}
