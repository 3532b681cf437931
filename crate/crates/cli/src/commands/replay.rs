use std::path::PathBuf;

use anyhow::{bail, Result};

use crate::input::REFERENCE_TABLE;
use crate::manifest::Recorded;
use crate::{Context, Outcome};

#[derive(clap::Args)]
pub struct Args {
    /// Manifest written beside an earlier output.
    manifest: PathBuf,
}

/// Reruns the command recorded in a manifest, after checking that its
/// inputs are unchanged, and verifies that the outputs are reproduced
/// byte for byte. Relative paths resolve against the current directory.
pub fn run(args: Args, ctx: &Context) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.manifest)?;
    let recorded = Recorded::parse(&text)?;
    if recorded.argv.get(1).map(String::as_str) == Some("replay") {
        bail!("refusing to replay a replay");
    }
    recorded.check_inputs(|name| (name == "reference-table").then_some(REFERENCE_TABLE))?;
    let mut argv = recorded.argv.clone();
    if ctx.quiet {
        argv.insert(1, "--quiet".into());
    }
    let code = crate::run(&argv);
    if code != 0 {
        return Ok(Outcome::Inconsistent(format!(
            "replayed command exited with status {code}"
        )));
    }
    let changed = recorded.changed_outputs();
    if changed.is_empty() {
        ctx.report(&format!(
            "reproduced {} output file(s) exactly\n",
            recorded.outputs.len()
        ));
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::Inconsistent(format!(
            "replay changed {}",
            changed.join(", ")
        )))
    }
}
