use std::path::PathBuf;

use anyhow::Result;
use clap::ValueEnum;
use ifm_core::model::{
    optimize_attenuation, AttenuationGrid, AttenuationScan, Objective, ObjectiveValue,
    DESIGN_WINDOW,
};

use crate::input::load_params;
use crate::manifest::RunManifest;
use crate::output::{emit, with_suffix};
use crate::{Context, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Enrichment,
    Likelihood,
    Correct,
    All,
}

#[derive(clap::Args)]
pub struct Args {
    /// Interferometer parameters (key=value).
    #[arg(long)]
    params: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    objective: ObjectiveArg,
    /// Black prior used by the enrichment and classification objectives.
    #[arg(long, default_value_t = 0.5)]
    f: f64,
    /// Number of grid points in (0, 1].
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    /// Output prefix; writes `<out>-<objective>.csv` and `<out>-summary.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for uniformity; the scan is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args, ctx: &Context) -> Result<Outcome> {
    let mut manifest = RunManifest::new("optimize", &ctx.argv);
    let params = load_params(&args.params, &mut manifest)?;
    manifest
        .param("objective", format!("{:?}", args.objective).to_lowercase())
        .param("f", args.f)
        .param("points", args.points);
    if let Some(seed) = args.seed {
        manifest.seed(seed);
    }
    let objectives: Vec<Objective> = match args.objective {
        ObjectiveArg::Enrichment => vec![Objective::EnrichmentAt { f: args.f }],
        ObjectiveArg::Likelihood => vec![Objective::LikelihoodRatio],
        ObjectiveArg::Correct => vec![Objective::CorrectClassification { f: args.f }],
        ObjectiveArg::All => vec![
            Objective::EnrichmentAt { f: args.f },
            Objective::LikelihoodRatio,
            Objective::CorrectClassification { f: args.f },
        ],
    };
    let grid = AttenuationGrid {
        points: args.points as usize,
    };
    let scans = objectives
        .into_iter()
        .map(|o| optimize_attenuation(&params, o, grid))
        .collect::<Result<Vec<_>, _>>()?;

    let summary = summary_csv(&scans);
    match &args.out {
        Some(prefix) => {
            for scan in &scans {
                let path = with_suffix(prefix, &format!("-{}.csv", scan.objective.name()));
                manifest.write_output(&path, &scan_csv(scan))?;
            }
            let path = with_suffix(prefix, "-summary.csv");
            emit(Some(&path), &summary, &mut manifest)?;
        }
        None => {
            let mut text = String::new();
            for scan in &scans {
                text.push_str(&format!("# objective={}\n", scan.objective.name()));
                text.push_str(&scan_csv(scan));
                text.push('\n');
            }
            text.push_str(&summary);
            emit(None, &text, &mut manifest)?;
        }
    }
    for scan in &scans {
        ctx.report(&format!("{}\n", describe(scan)));
    }
    Ok(Outcome::Success)
}

fn value_fields(v: &ObjectiveValue) -> (String, &'static str) {
    match v {
        ObjectiveValue::Finite(x) => (x.to_string(), "finite"),
        ObjectiveValue::Unbounded => (String::new(), "unbounded"),
        ObjectiveValue::Undefined(_) => (String::new(), "undefined"),
    }
}

fn scan_csv(scan: &AttenuationScan) -> String {
    let mut out = String::from("t,value,status\n");
    for p in &scan.points {
        let (value, status) = value_fields(&p.value);
        out.push_str(&format!("{},{value},{status}\n", p.t));
    }
    out
}

fn summary_csv(scans: &[AttenuationScan]) -> String {
    let mut out = format!(
        "# design window [{}, {}]\nobjective,t_opt,value,status,in_design_window,undefined_points\n",
        DESIGN_WINDOW.0, DESIGN_WINDOW.1
    );
    for scan in scans {
        let (t, value, status) = match scan.optimum_point() {
            Some(p) => {
                let (v, s) = value_fields(&p.value);
                (p.t.to_string(), v, s)
            }
            None => (String::new(), String::new(), "undefined"),
        };
        out.push_str(&format!(
            "{},{t},{value},{status},{},{}\n",
            scan.objective.name(),
            scan.optimum_in_design_window(),
            scan.undefined_count()
        ));
    }
    out
}

fn describe(scan: &AttenuationScan) -> String {
    let name = scan.objective.name();
    match scan.optimum_point() {
        None => format!("{name}: undefined on the whole grid"),
        Some(p) => {
            let value = match &p.value {
                ObjectiveValue::Finite(x) => format!("{x:.4}"),
                _ => "unbounded".to_string(),
            };
            let window = if scan.optimum_in_design_window() {
                "inside"
            } else {
                "outside"
            };
            format!(
                "{name}: optimum t = {:.4}, value {value}, {window} [{}, {}]",
                p.t, DESIGN_WINDOW.0, DESIGN_WINDOW.1
            )
        }
    }
}
