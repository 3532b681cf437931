use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use ifm_core::protocol::{enrichment_curve, EnrichmentPoint};

use crate::input::load_probabilities;
use crate::manifest::RunManifest;
use crate::output::{emit, sig};
use crate::svg;
use crate::{Context, Outcome};

#[derive(clap::Args)]
pub struct Args {
    /// Probabilities: reduce output, parameter file or count table.
    /// Defaults to the built-in reference table.
    #[arg(long)]
    probs: Option<PathBuf>,
    /// Black-fraction grid `start:stop:step`, or a single value.
    #[arg(long, default_value = "0:1:0.01")]
    grid: Grid,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also draw the curves with ±1σ bands.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Accepted for uniformity; the curves are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    start: f64,
    stop: f64,
    step: f64,
}

impl Grid {
    fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| (self.start + i as f64 * self.step).min(self.stop))
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("bad grid `{s}`: {e}"))?;
        let grid = match nums[..] {
            [v] => Grid {
                start: v,
                stop: v,
                step: 1.0,
            },
            [start, stop, step] => Grid { start, stop, step },
            _ => return Err(format!("grid must be start:stop:step, got `{s}`")),
        };
        if !(0.0..=1.0).contains(&grid.start) || !(0.0..=1.0).contains(&grid.stop) {
            return Err("grid bounds must lie in [0,1]".into());
        }
        if grid.start > grid.stop {
            return Err("grid start exceeds stop".into());
        }
        if !grid.step.is_finite() || grid.step <= 0.0 {
            return Err("grid step must be positive".into());
        }
        Ok(grid)
    }
}

const HEADER: &str = "\
# f_black_in_ii: fraction of black objects among group-ii objects
# f_trans_in_i: fraction of transparent objects among group-i objects
# a zero denominator gives the endpoint value at f=0 or f=1 and an empty
# field elsewhere; sigmas are first-order propagations of the probability
# uncertainties
";

pub fn run(args: Args, ctx: &Context) -> Result<Outcome> {
    let mut manifest = RunManifest::new("curves", &ctx.argv);
    let table = load_probabilities(args.probs.as_deref(), &mut manifest)?;
    manifest.param(
        "grid",
        format!("{}:{}:{}", args.grid.start, args.grid.stop, args.grid.step),
    );
    if let Some(seed) = args.seed {
        manifest.seed(seed);
    }
    let grid = args.grid.values();
    if grid.is_empty() {
        bail!("empty grid");
    }
    let points = enrichment_curve(&table, &grid)?;
    if let Some(path) = &args.svg {
        manifest.write_output(path, &svg::enrichment_plot(&points))?;
        if args.out.is_none() {
            manifest.write_beside(path)?;
        }
    }
    emit(args.out.as_deref(), &to_csv(&points), &mut manifest)?;
    Ok(Outcome::Success)
}

fn to_csv(points: &[EnrichmentPoint]) -> String {
    let mut out = String::from(HEADER);
    out.push_str("f_original,f_black_in_ii,sigma_ii,f_trans_in_i,sigma_i\n");
    let cell = |e: Option<ifm_core::Estimate>| match e {
        Some(e) => format!("{},{}", sig(e.value, 6), sig(e.sigma, 6)),
        None => ",".to_string(),
    };
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            sig(p.f_original, 6),
            cell(p.f_black_in_ii),
            cell(p.f_trans_in_i)
        ));
    }
    out
}
