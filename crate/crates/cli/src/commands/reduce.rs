use std::path::PathBuf;

use anyhow::Result;
use ifm_core::inference::{reduce, CountTable, Propagation, ReduceOptions, Reduction};
use ifm_core::kv::KvDocument;
use ifm_core::{Group, ObjectKind};

use super::Format;
use crate::manifest::RunManifest;
use crate::output::{emit, sig};
use crate::{Context, Outcome};

#[derive(clap::Args)]
pub struct Args {
    /// Count table (`detector,config,counts`).
    counts: PathBuf,
    #[arg(long, value_enum, default_value = "kv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Propagate the common transparent-run normalisation exactly instead
    /// of treating the three groups as independent.
    #[arg(long)]
    exact: bool,
    /// Efficiency of the exit detectors P1 and P2.
    #[arg(long, default_value_t = 1.0)]
    exit_efficiency: f64,
    /// Efficiency of the object detector D.
    #[arg(long, default_value_t = 0.65)]
    object_efficiency: f64,
    /// Live-time ratio applied to the background run.
    #[arg(long, default_value_t = 1.0)]
    background_scale: f64,
    /// Accepted for uniformity; reduction is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args, ctx: &Context) -> Result<Outcome> {
    let mut manifest = RunManifest::new("reduce", &ctx.argv);
    let text = manifest.read_input(&args.counts)?;
    let counts = CountTable::parse(&text)?;
    let options = ReduceOptions {
        propagation: if args.exact {
            Propagation::Exact
        } else {
            Propagation::Uncorrelated
        },
        exit_detector_efficiency: args.exit_efficiency,
        background_scale: args.background_scale,
        object_detector_efficiency: args.object_efficiency,
    };
    manifest
        .param(
            "propagation",
            if args.exact { "exact" } else { "uncorrelated" },
        )
        .param("exit_efficiency", args.exit_efficiency)
        .param("object_efficiency", args.object_efficiency)
        .param("background_scale", args.background_scale);
    if let Some(seed) = args.seed {
        manifest.seed(seed);
    }
    let reduction = reduce(&counts, &options)?;

    let text = match args.format {
        Format::Kv => to_kv(&reduction).to_string(),
        Format::Csv => to_csv(&reduction),
    };
    emit(args.out.as_deref(), &text, &mut manifest)?;
    ctx.report(&summary(&reduction));

    match reduction.consistency {
        Some(c) if !c.is_consistent() => Ok(Outcome::Inconsistent(format!(
            "object-detector counts disagree with the absorption probability (pull {:.2})",
            c.pull
        ))),
        _ => Ok(Outcome::Success),
    }
}

fn to_kv(r: &Reduction) -> KvDocument {
    let mut doc = r.table.to_kv();
    doc.push_f64("trans_net_total", r.transparent_net.exit_total().value);
    doc.push_f64(
        "trans_net_total_sigma",
        r.transparent_net.exit_total().sigma,
    );
    if let Some(c) = r.consistency {
        doc.push_f64("d_predicted", c.predicted.value);
        doc.push_f64("d_predicted_sigma", c.predicted.sigma);
        doc.push_f64("d_observed", c.observed.value);
        doc.push_f64("d_observed_sigma", c.observed.sigma);
        doc.push_f64("d_pull", c.pull);
        doc.push(
            "consistent",
            if c.is_consistent() { "true" } else { "false" },
        );
    }
    doc
}

fn to_csv(r: &Reduction) -> String {
    let mut out = String::new();
    if let Some(c) = r.consistency {
        out.push_str(&format!(
            "# object detector: predicted {} +- {}, observed {} +- {}, pull {}\n",
            sig(c.predicted.value, 6),
            sig(c.predicted.sigma, 6),
            sig(c.observed.value, 6),
            sig(c.observed.sigma, 6),
            sig(c.pull, 6),
        ));
    }
    out.push_str("object,group,probability,sigma\n");
    for kind in ObjectKind::ALL {
        let row = r.table.row(kind);
        for g in Group::ALL {
            if kind == ObjectKind::Transparent && g == Group::III {
                continue;
            }
            let e = row.get(g);
            out.push_str(&format!(
                "{kind},{g},{},{}\n",
                sig(e.value, 6),
                sig(e.sigma, 6)
            ));
        }
    }
    out
}

fn summary(r: &Reduction) -> String {
    let mut out = String::new();
    for kind in ObjectKind::ALL {
        let row = r.table.row(kind);
        out.push_str(&format!("{:<12}", kind.as_str()));
        for g in Group::ALL {
            if kind == ObjectKind::Transparent && g == Group::III {
                continue;
            }
            out.push_str(&format!("  {g:>3}: {:.3}", row.get(g)));
        }
        out.push('\n');
    }
    if let Some(c) = r.consistency {
        out.push_str(&format!(
            "object detector: predicted {:.1}, observed {:.1}, pull {:+.2}\n",
            c.predicted, c.observed, c.pull
        ));
    }
    out
}
