use std::path::PathBuf;

use anyhow::Result;
use ifm_core::kv::KvDocument;
use ifm_core::model::{calibrate_fit, CalibrationTargets, FitConfig};

use crate::manifest::RunManifest;
use crate::output::emit;
use crate::{Context, Outcome};

#[derive(clap::Args)]
pub struct Args {
    /// Calibration targets (key=value).
    targets: PathBuf,
    /// Where to write the fitted parameters.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the multi-start generator.
    #[arg(long, default_value_t = FitConfig::default().seed)]
    seed: u64,
    /// Number of random starting points.
    #[arg(long, default_value_t = FitConfig::default().starts)]
    starts: usize,
    /// Largest absolute residual accepted.
    #[arg(long, default_value_t = FitConfig::default().residual_bound)]
    bound: f64,
}

pub fn run(args: Args, ctx: &Context) -> Result<Outcome> {
    let mut manifest = RunManifest::new("calibrate", &ctx.argv);
    let text = manifest.read_input(&args.targets)?;
    let targets = CalibrationTargets::from_kv(&KvDocument::parse(&text)?)?;
    let config = FitConfig {
        starts: args.starts,
        seed: args.seed,
        residual_bound: args.bound,
        ..FitConfig::default()
    };
    manifest
        .seed(args.seed)
        .param("starts", args.starts)
        .param("bound", args.bound);
    let fit = calibrate_fit(&targets, &config)?;

    let mut doc = KvDocument::new();
    doc.comment(format!(
        "fit cost {:.6e}, max |residual| {:.4}, {}",
        fit.cost,
        fit.max_abs_residual(),
        if fit.is_converged() {
            "converged"
        } else {
            "above bound"
        }
    ));
    doc.extend(&fit.params.to_kv());
    emit(args.out.as_deref(), &doc.to_string(), &mut manifest)?;

    let mut table = format!(
        "{:<18} {:>10} {:>10} {:>10}\n",
        "target", "measured", "fitted", "residual"
    );
    for r in &fit.residuals {
        table.push_str(&format!(
            "{:<18} {:>10.4} {:>10.4} {:>+10.4}\n",
            r.name,
            r.target,
            r.fitted,
            r.absolute()
        ));
    }
    ctx.report(&table);
    if fit.is_converged() {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::CalibrationFailed(format!(
            "largest residual {:.4} exceeds the bound {}",
            fit.max_abs_residual(),
            args.bound
        )))
    }
}
