use std::path::PathBuf;

use anyhow::Result;
use clap::ValueEnum;
use ifm_core::kv::format_f64;
use ifm_core::montecarlo::{
    empirical_vs_analytic, run_strategy_with, Comparison, Composition, EnsembleReport,
    EnsembleSpec, RunOptions, DEFAULT_RETEST_CAP,
};
use ifm_core::protocol::Strategy;

use super::Format;
use crate::input::load_probabilities;
use crate::manifest::RunManifest;
use crate::output::{emit, sig};
use crate::{Context, Outcome};

/// Pulls beyond this flag a disagreement between simulation and closed form.
pub const PULL_ALARM: f64 = 5.0;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CompositionArg {
    Exact,
    Binomial,
}

#[derive(clap::Args)]
pub struct Args {
    /// Number of objects.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Black fraction of the ensemble.
    #[arg(long, default_value_t = 0.5)]
    f: f64,
    /// single, repeat or purify:N.
    #[arg(long, default_value = "single")]
    strategy: Strategy,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Probabilities: reduce output, parameter file or count table.
    /// Defaults to the built-in reference table.
    #[arg(long)]
    probs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    composition: CompositionArg,
    /// Tests allowed per object before it is left in its current group.
    #[arg(long, default_value_t = DEFAULT_RETEST_CAP)]
    retest_cap: u64,
    #[arg(long, value_enum, default_value = "kv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, ctx: &Context) -> Result<Outcome> {
    let mut manifest = RunManifest::new("simulate", &ctx.argv);
    let table = load_probabilities(args.probs.as_deref(), &mut manifest)?;
    let spec = EnsembleSpec {
        composition: match args.composition {
            CompositionArg::Exact => Composition::ExactCount,
            CompositionArg::Binomial => Composition::Binomial,
        },
        ..EnsembleSpec::new(args.n, args.f)
    };
    manifest
        .seed(args.seed)
        .param("n", args.n)
        .param("f", args.f)
        .param("strategy", args.strategy)
        .param(
            "composition",
            format!("{:?}", args.composition).to_lowercase(),
        )
        .param("retest_cap", args.retest_cap);
    let options = RunOptions {
        retest_cap: args.retest_cap,
    };
    let report = run_strategy_with(&spec, args.strategy, &table, args.seed, &options)?;
    let comparisons = empirical_vs_analytic(&report, args.strategy, &table)?;

    let text = match args.format {
        Format::Kv => to_kv(&report, &comparisons),
        Format::Csv => format!("{}\n{}", report.to_csv(), pulls_csv(&comparisons)),
    };
    emit(args.out.as_deref(), &text, &mut manifest)?;

    let mut table = format!(
        "{:<28} {:>12} {:>12} {:>8}\n",
        "quantity", "simulated", "expected", "pull"
    );
    for c in &comparisons {
        table.push_str(&format!(
            "{:<28} {:>12.6} {:>12.6} {:>+8.2}\n",
            c.quantity, c.empirical, c.expected, c.pull
        ));
    }
    ctx.report(&table);
    if report.capped_objects > 0 {
        eprintln!(
            "warning: {} objects reached the retest cap",
            report.capped_objects
        );
    }
    let worst = comparisons
        .iter()
        .max_by(|a, b| a.pull.abs().total_cmp(&b.pull.abs()));
    match worst {
        Some(c) if c.pull.is_nan() || c.pull.abs() > PULL_ALARM => {
            Ok(Outcome::Inconsistent(format!(
                "{} deviates from its closed form by {:.1} sigma",
                c.quantity, c.pull
            )))
        }
        _ => Ok(Outcome::Success),
    }
}

fn to_kv(report: &EnsembleReport, comparisons: &[Comparison]) -> String {
    let mut doc = report.to_kv();
    for c in comparisons {
        doc.push(
            &format!("{}.simulated", c.quantity),
            format_f64(c.empirical),
        );
        doc.push(&format!("{}.expected", c.quantity), format_f64(c.expected));
        doc.push(&format!("{}.sigma", c.quantity), format_f64(c.sigma));
        doc.push(&format!("{}.pull", c.quantity), format_f64(c.pull));
    }
    doc.to_string()
}

fn pulls_csv(comparisons: &[Comparison]) -> String {
    let mut out = String::from("quantity,simulated,expected,sigma,pull\n");
    for c in comparisons {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.quantity,
            sig(c.empirical, 6),
            sig(c.expected, 6),
            sig(c.sigma, 6),
            sig(c.pull, 6)
        ));
    }
    out
}
