mod output;
mod render;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::run::{Options, Verdict};
use crate::scenario::{GroundStateScenario, Kind};

/// Lennard-Jones lattice fracture experiments.
///
/// Exit status: 0 on success, 2 when a state fails strict admissibility
/// (expected for negative scenarios), 1 on errors.
/// LATTICE_FRACTURE_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "lattice-fracture", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run(RunArgs),
    /// Redraw a stored state JSON as reference and deformed SVGs.
    Render(RenderArgs),
    /// Tabulate φ and draw the Wulff hexagon.
    Wulff(WulffArgs),
    /// Run a scenario file of kind "minimize".
    Minimize(RunArgs),
    /// Scan the per-particle energy of the triangular lattice against its spacing.
    GroundState(GroundArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Comma-separated mesh sizes, e.g. "1/16,1/32"; replaces the file's list.
    #[arg(long)]
    epsilon_list: Option<String>,
    /// Output directory; defaults to the file's `out` or out/<file stem>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in the summary; every pipeline is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    s_threshold: Option<f64>,
    /// Admissibility margin: det ∇u must exceed margin·√3/2.
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args)]
struct RenderArgs {
    state: PathBuf,
    #[arg(long, default_value = "out/render")]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    j_inf: f64,
    #[arg(long, default_value_t = 0.5)]
    s_threshold: f64,
}

#[derive(Args)]
struct WulffArgs {
    #[arg(long, default_value_t = 360)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    j_inf: f64,
    #[arg(long, default_value = "out/wulff")]
    out: PathBuf,
}

#[derive(Args)]
struct GroundArgs {
    #[arg(long, default_value_t = 0.8)]
    r_min: f64,
    #[arg(long, default_value_t = 1.5)]
    r_max: f64,
    #[arg(long, default_value_t = 141)]
    samples: usize,
    /// Interaction cutoff in units of the spacing; 1 keeps nearest neighbours only.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 1.0)]
    j_inf: f64,
    #[arg(long, default_value = "out/ground-state")]
    out: PathBuf,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LATTICE_FRACTURE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("LATTICE_FRACTURE_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run_file(a: &RunArgs, require_minimize: bool) -> Result<Verdict> {
    let text = std::fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let mut s = scenario::load(&text).with_context(|| format!("in {}", a.scenario.display()))?;
    if require_minimize && s.kind != Kind::Minimize {
        anyhow::bail!("the minimize subcommand needs kind = \"minimize\", found {:?}", s.kind);
    }
    if let Some(list) = &a.epsilon_list {
        s.epsilons = list.split(',').map(scenario::parse_epsilon).collect::<Result<_>>()?;
    }
    if let Some(t) = a.s_threshold {
        s.s_threshold = t;
    }
    if let Some(m) = a.margin {
        s.margin = m;
    }
    if a.seed.is_some() {
        s.seed = a.seed;
    }
    s.validate()?;
    let stem = a.scenario.file_stem().and_then(|x| x.to_str()).unwrap_or("scenario").to_string();
    let out = a.out.clone().or_else(|| s.out.clone()).unwrap_or_else(|| Path::new("out").join(&stem));
    let name = a.scenario.file_name().and_then(|x| x.to_str()).unwrap_or("scenario").to_string();
    run::run(&s, &Options { out, name })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Run(a) => run_file(a, false),
        Command::Minimize(a) => run_file(a, true),
        Command::Render(a) => run::render_state(&a.state, &a.out, a.j_inf, a.s_threshold).map(|_| Verdict::Ok),
        Command::Wulff(a) => run::wulff(a.samples, a.j_inf, &a.out).map(|_| Verdict::Ok),
        Command::GroundState(a) => {
            let p = GroundStateScenario { r_min: a.r_min, r_max: a.r_max, samples: a.samples, cutoff: a.cutoff };
            run::ground_state(&p, a.j_inf, &a.out).map(|_| Verdict::Ok)
        }
    });
    match result {
        Ok(v) => ExitCode::from(run::exit_code(v)),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
