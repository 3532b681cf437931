use std::path::Path;

use anyhow::{Context, Result};
use ifm_core::inference::{reduce, CountTable, ReduceOptions};
use ifm_core::kv::KvDocument;
use ifm_core::model::{probability_table, InterferometerParams};
use ifm_core::ProbabilityTable;

use crate::manifest::RunManifest;

/// Printed single-test probabilities of the reference instrument.
pub const REFERENCE_TABLE: &str = include_str!("../../core/data/reference_probabilities.kv");

/// Loads a probability table from a count table, an interferometer
/// parameter file or a probability kv file, told apart by content.
pub fn load_probabilities(
    path: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<ProbabilityTable> {
    let Some(path) = path else {
        manifest.builtin_input("reference-table", REFERENCE_TABLE);
        return Ok(ProbabilityTable::from_kv(&KvDocument::parse(
            REFERENCE_TABLE,
        )?)?);
    };
    let text = manifest.read_input(path)?;
    let ctx = || format!("in {}", path.display());
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    if first.is_some_and(|l| l.starts_with("detector,")) {
        let counts = CountTable::parse(&text).with_context(ctx)?;
        return Ok(reduce(&counts, &ReduceOptions::default())
            .with_context(ctx)?
            .table);
    }
    let doc = KvDocument::parse(&text).with_context(ctx)?;
    if doc.contains("c_1_I") {
        let params = InterferometerParams::from_kv(&doc).with_context(ctx)?;
        Ok(probability_table(&params).with_context(ctx)?)
    } else {
        Ok(ProbabilityTable::from_kv(&doc).with_context(ctx)?)
    }
}

pub fn load_params(path: &Path, manifest: &mut RunManifest) -> Result<InterferometerParams> {
    let text = manifest.read_input(path)?;
    let doc = KvDocument::parse(&text).with_context(|| format!("in {}", path.display()))?;
    InterferometerParams::from_kv(&doc).with_context(|| format!("in {}", path.display()))
}
