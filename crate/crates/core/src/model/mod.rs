//! Phenomenological forward model of a non-ideal two-path interferometer.
//!
//! Each exit `e` receives an intensity from path I and from path II. Part of
//! each contribution is coherent (`coh_coupling`) and part is not
//! (`inc_coupling`). The coherent parts interfere with visibility
//! `coherence`, so for a transparent (or absent) object
//!
//! ```text
//! i_e = t·m[e][I] + m[e][II] + s_e·2V·sqrt(t·c[e][I]·c[e][II])·cos(phase + phi0)
//! ```
//!
//! with `m = c + k`. A black object removes the path-I contribution and the
//! cross term. Flux that reaches neither exit nor an absorber is booked as
//! `lost_unused`.

mod attenuation;
mod calibrate;

pub use attenuation::{
    optimize_attenuation, AttenuationGrid, AttenuationScan, Objective, ObjectiveValue, ScanPoint,
    DESIGN_WINDOW,
};
pub use calibrate::{
    calibrate_fit, forward_targets, Calibration, CalibrationStatus, CalibrationTargets, FitConfig,
    Residual,
};

use std::f64::consts::PI;

use crate::estimate::Estimate;
use crate::kv::KvDocument;
use crate::outcome::{ObjectKind, OutcomeProbabilities, ProbabilityTable};
use crate::{Error, Result};

pub const EXIT_1: usize = 0;
pub const EXIT_2: usize = 1;
pub const PATH_I: usize = 0;
pub const PATH_II: usize = 1;

/// Coefficients of the non-ideal interferometer. Couplings are indexed
/// `[exit][path]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerParams {
    pub coh_coupling: [[f64; 2]; 2],
    pub inc_coupling: [[f64; 2]; 2],
    /// Visibility factor `V` in `[0, 1]`.
    pub coherence: f64,
    /// Sign of the interference term at each exit, `+1` or `-1`.
    pub exit_sign: [f64; 2],
    /// Internal phase offset in radians.
    pub phase_offset: f64,
    /// Intensity transmittance `t` of the absorber sheet in path I.
    pub attenuation: f64,
    /// Total path-I intensity at the test position before attenuation.
    pub test_path_flux: f64,
}

/// Fate of the incident flux for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitIntensities {
    pub i1: f64,
    pub i2: f64,
    pub absorbed_object: f64,
    pub absorbed_attenuator: f64,
    pub lost_unused: f64,
}

impl ExitIntensities {
    pub fn total(&self) -> f64 {
        self.i1 + self.i2 + self.absorbed_object + self.absorbed_attenuator + self.lost_unused
    }

    pub fn exit(&self, exit: usize) -> f64 {
        if exit == EXIT_1 {
            self.i1
        } else {
            self.i2
        }
    }
}

impl InterferometerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        for (name, table) in [("c", &self.coh_coupling), ("k", &self.inc_coupling)] {
            for (e, row) in table.iter().enumerate() {
                for (p, &x) in row.iter().enumerate() {
                    if !x.is_finite() || x < 0.0 {
                        return bad(format!(
                            "{} must be finite and non-negative, got {x}",
                            coupling_key(name, e, p)
                        ));
                    }
                }
            }
        }
        if !(0.0..=1.0).contains(&self.coherence) {
            return bad(format!("V must lie in [0,1], got {}", self.coherence));
        }
        if !(0.0..=1.0).contains(&self.attenuation) {
            return bad(format!("t must lie in [0,1], got {}", self.attenuation));
        }
        for (e, &s) in self.exit_sign.iter().enumerate() {
            if s != 1.0 && s != -1.0 {
                return bad(format!("s_{} must be +1 or -1, got {s}", e + 1));
            }
        }
        if !self.phase_offset.is_finite() {
            return bad(format!("phi0 must be finite, got {}", self.phase_offset));
        }
        let reaching_exits = self.path_total(PATH_I);
        if !self.test_path_flux.is_finite() || self.test_path_flux < reaching_exits - 1e-12 {
            return bad(format!(
                "F_I = {} is below the path-I flux reaching the exits ({reaching_exits})",
                self.test_path_flux
            ));
        }
        Ok(())
    }

    /// Copy with a different attenuator transmittance.
    pub fn with_attenuation(&self, t: f64) -> Self {
        Self {
            attenuation: t,
            ..*self
        }
    }

    /// Total coupling `m = c + k` from `path` into `exit`.
    pub fn coupling(&self, exit: usize, path: usize) -> f64 {
        self.coh_coupling[exit][path] + self.inc_coupling[exit][path]
    }

    fn path_total(&self, path: usize) -> f64 {
        self.coupling(EXIT_1, path) + self.coupling(EXIT_2, path)
    }

    /// Interference amplitude at `exit` for unit transmittance.
    pub fn cross_amplitude(&self, exit: usize) -> f64 {
        2.0 * self.coherence
            * (self.coh_coupling[exit][PATH_I] * self.coh_coupling[exit][PATH_II]).sqrt()
    }

    /// Path-II intensity entering the interferometer. Besides what reaches
    /// the exits it carries the headroom needed to keep `lost_unused`
    /// non-negative when the two exits' cross terms do not cancel.
    pub fn path_ii_flux(&self) -> f64 {
        let net_cross = self.exit_sign[EXIT_1] * self.cross_amplitude(EXIT_1)
            + self.exit_sign[EXIT_2] * self.cross_amplitude(EXIT_2);
        self.path_total(PATH_II) + net_cross.abs()
    }

    /// Total incident flux `F_I + F_II`.
    pub fn incident_flux(&self) -> f64 {
        self.test_path_flux + self.path_ii_flux()
    }

    /// The phase at which exit 1 is at its maximum (offset nulled).
    pub fn operating_phase(&self) -> f64 {
        if self.exit_sign[EXIT_1] < 0.0 {
            PI - self.phase_offset
        } else {
            -self.phase_offset
        }
    }

    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        for (name, table) in [("c", &self.coh_coupling), ("k", &self.inc_coupling)] {
            for (e, row) in table.iter().enumerate() {
                for (p, value) in row.iter().enumerate() {
                    doc.push_f64(&coupling_key(name, e, p), *value);
                }
            }
        }
        doc.push_f64("V", self.coherence);
        doc.push_f64("s_1", self.exit_sign[EXIT_1]);
        doc.push_f64("s_2", self.exit_sign[EXIT_2]);
        doc.push_f64("phi0", self.phase_offset);
        doc.push_f64("t", self.attenuation);
        doc.push_f64("F_I", self.test_path_flux);
        doc
    }

    /// Reads parameters from a key=value document. `s_1`/`s_2` default to
    /// `+1`/`-1` and `phi0` to zero when absent.
    pub fn from_kv(doc: &KvDocument) -> Result<Self> {
        let mut coh = [[0.0; 2]; 2];
        let mut inc = [[0.0; 2]; 2];
        for e in 0..2 {
            for p in 0..2 {
                coh[e][p] = doc.require_f64(&coupling_key("c", e, p))?;
                inc[e][p] = doc.require_f64(&coupling_key("k", e, p))?;
            }
        }
        let params = Self {
            coh_coupling: coh,
            inc_coupling: inc,
            coherence: doc.require_f64("V")?,
            exit_sign: [
                doc.get_f64("s_1")?.unwrap_or(1.0),
                doc.get_f64("s_2")?.unwrap_or(-1.0),
            ],
            phase_offset: doc.get_f64("phi0")?.unwrap_or(0.0),
            attenuation: doc.require_f64("t")?,
            test_path_flux: doc.require_f64("F_I")?,
        };
        params.validate()?;
        Ok(params)
    }
}

fn coupling_key(name: &str, exit: usize, path: usize) -> String {
    let path = if path == PATH_I { "I" } else { "II" };
    format!("{name}_{}_{path}", exit + 1)
}

/// Parameters of the ideal lossless Mach-Zehnder with 50% beam splitters.
pub fn ideal_params() -> InterferometerParams {
    InterferometerParams {
        coh_coupling: [[0.25; 2]; 2],
        inc_coupling: [[0.0; 2]; 2],
        coherence: 1.0,
        exit_sign: [1.0, -1.0],
        phase_offset: 0.0,
        attenuation: 1.0,
        test_path_flux: 0.5,
    }
}

/// Exit intensities and absorber losses at `phase`. `object = None` is an
/// empty test position, which behaves like a transparent object.
pub fn exit_intensities(
    params: &InterferometerParams,
    phase: f64,
    object: Option<ObjectKind>,
) -> Result<ExitIntensities> {
    params.validate()?;
    let t = params.attenuation;
    // g is the path-I transmission of the object itself.
    let g: f64 = match object {
        Some(ObjectKind::Black) => 0.0,
        Some(ObjectKind::Transparent) | None => 1.0,
    };
    let cos = (phase + params.phase_offset).cos();
    let mut exits = [0.0; 2];
    for (e, out) in exits.iter_mut().enumerate() {
        let cross = params.exit_sign[e]
            * 2.0
            * params.coherence
            * (t * params.coh_coupling[e][PATH_I] * params.coh_coupling[e][PATH_II]).sqrt()
            * g.sqrt()
            * cos;
        let incoherent = t * params.coupling(e, PATH_I) * g + params.coupling(e, PATH_II);
        // Rounding can push a fully destructive exit a hair below zero.
        *out = (incoherent + cross).max(0.0);
    }
    let absorbed_object = (1.0 - g) * t * params.test_path_flux;
    let absorbed_attenuator = (1.0 - t) * params.test_path_flux;
    let accounted = exits[EXIT_1] + exits[EXIT_2] + absorbed_object + absorbed_attenuator;
    let lost_unused = (params.incident_flux() - accounted).max(0.0);
    Ok(ExitIntensities {
        i1: exits[EXIT_1],
        i2: exits[EXIT_2],
        absorbed_object,
        absorbed_attenuator,
        lost_unused,
    })
}

/// Outcome probabilities at the operating point (exit 1 at its maximum).
///
/// Black objects are normalised over P1, P2 and absorption in the object;
/// transparent objects over P1 and P2. Losses to the attenuator and to unused
/// beams are conditioned away. Sigmas are zero.
pub fn outcome_probabilities(
    params: &InterferometerParams,
    object: ObjectKind,
) -> Result<OutcomeProbabilities> {
    let fates = exit_intensities(params, params.operating_phase(), Some(object))?;
    match object {
        ObjectKind::Black => {
            let sum = fates.i1 + fates.i2 + fates.absorbed_object;
            if sum <= 0.0 {
                return Err(Error::DegenerateConfiguration(
                    "no flux reaches P1, P2 or the object".into(),
                ));
            }
            let p_i = fates.i1 / sum;
            let p_ii = fates.i2 / sum;
            OutcomeProbabilities::new(
                object,
                Estimate::exact(p_i),
                Estimate::exact(p_ii),
                Some(Estimate::exact(fates.absorbed_object / sum)),
            )
        }
        ObjectKind::Transparent => {
            let sum = fates.i1 + fates.i2;
            if sum <= 0.0 {
                return Err(Error::DegenerateConfiguration(
                    "no flux reaches P1 or P2".into(),
                ));
            }
            let p_i = fates.i1 / sum;
            OutcomeProbabilities::new(
                object,
                Estimate::exact(p_i),
                Estimate::exact(1.0 - p_i),
                None,
            )
        }
    }
}

/// Both outcome rows of the model at its current attenuation.
pub fn probability_table(params: &InterferometerParams) -> Result<ProbabilityTable> {
    ProbabilityTable::new(
        outcome_probabilities(params, ObjectKind::Black)?,
        outcome_probabilities(params, ObjectKind::Transparent)?,
    )
}

/// Mean and oscillation amplitude of each exit over phase, empty test
/// position.
pub fn exit_curves(params: &InterferometerParams) -> Result<[(f64, f64); 2]> {
    let at_max = exit_intensities(params, params.operating_phase(), None)?;
    let at_min = exit_intensities(params, params.operating_phase() + PI, None)?;
    let curve = |e| {
        let (a, b) = (at_max.exit(e), at_min.exit(e));
        (0.5 * (a + b), 0.5 * (a - b).abs())
    };
    Ok([curve(EXIT_1), curve(EXIT_2)])
}
