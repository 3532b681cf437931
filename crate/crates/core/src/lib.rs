//! Interaction-free measurement in a non-ideal two-path interferometer.
//!
//! The crate is split along the analysis pipeline:
//!
//! - [`model`]: phenomenological forward model of a lossy, reduced-contrast
//!   interferometer, its calibration against measured curves, and the
//!   attenuation scan.
//! - [`inference`]: reduction of raw detector counts to outcome
//!   probabilities with Poisson uncertainties.
//! - [`protocol`]: closed-form results for the classification strategies
//!   (single test, repeated tests of group i, purification of group ii).
//! - [`montecarlo`]: seeded ensemble simulation of the same strategies.
//! - [`kv`]: the flat `key=value` document used for parameters and reports.

pub mod estimate;
pub mod inference;
pub mod kv;
pub mod model;
pub mod montecarlo;
pub mod outcome;
pub mod protocol;

mod error;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use outcome::{Group, ObjectKind, OutcomeProbabilities, ProbabilityTable};
