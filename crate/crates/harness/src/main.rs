use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pme_harness::{run, sweep, Scenario, Stage};

#[derive(Parser)]
#[command(name = "pme", version, about = "Radial porous medium equation experiments on model manifolds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `outputs.dir` of the scenario).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat residual warnings as failures.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the warp, Laplacian coefficient and curvatures.
    Geometry(Common),
    /// Certify the coefficient bounds C′ and C″.
    Certify(Common),
    /// Residual sign checks of the power barriers.
    BarrierCheck(Common),
    /// Integrate the stationary profile and fit its growth exponent.
    Profile(Common),
    /// Run the solver on every configured radius.
    Solve(Common),
    /// Run the full pipeline.
    Run(Common),
    /// Run the full pipeline once per value of a numeric field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted field name, e.g. `pme.m` or `datum.amplitude`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; an empty list yields an empty table.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    let (common, stages): (&Common, &[Stage]) = match &cli.cmd {
        Cmd::Geometry(c) => (c, &[Stage::Geometry]),
        Cmd::Certify(c) => (c, &[Stage::Certify]),
        Cmd::BarrierCheck(c) => (c, &[Stage::Barriers]),
        Cmd::Profile(c) => (c, &[Stage::Profile]),
        Cmd::Solve(c) => (c, &[Stage::Solve]),
        Cmd::Run(c) => (c, &Stage::ALL),
        Cmd::Sweep { common, axis, values } => {
            let values = values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(|v| v.parse::<f64>().map_err(|e| anyhow::anyhow!("--values: {v}: {e}")))
                .collect::<anyhow::Result<Vec<f64>>>()?;
            let text = std::fs::read_to_string(&common.config)?;
            let base = Scenario::parse(&text)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&base.outputs.dir));
            let rows = sweep(&text, axis, &values, &out, common.strict)?;
            for r in &rows {
                match &r.error {
                    Some(e) => println!("{axis} = {}: error: {e}", r.value),
                    None => println!("{axis} = {}: {}", r.value, if r.passed { "pass" } else { "FAIL" }),
                }
            }
            println!("wrote {}", out.join("sweep.csv").display());
            return Ok(rows.iter().all(|r| r.passed));
        }
    };
    let sc = Scenario::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&sc.outputs.dir));
    let outcome = run(&sc, &out, stages)?;
    for w in &outcome.warnings {
        println!("warning: {w}");
    }
    for a in &outcome.assertions {
        println!("{}: {} ({})", a.name, if a.pass { "pass" } else { "FAIL" }, a.detail);
    }
    for (k, v) in &outcome.metrics {
        println!("{k} = {v}");
    }
    Ok(outcome.passed(common.strict))
}
