use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use corrsense::experiment::{self, ExperimentKind, Outputs, RunConfig};

/// Recovery of structured signals from corrupted measurements.
#[derive(Parser)]
#[command(name = "corrsense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one program per trial and report errors against the bounds.
    Solve(RunArgs),
    /// Aggregate success rates over a grid of measurement counts and sparsities.
    Sweep(RunArgs),
    /// Estimate widths, squared distances and ball complexities.
    Geometry(RunArgs),
    /// Check the deviation inequalities and the regularization recipe.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; defaults to the config's `output`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs, kind: ExperimentKind) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = RunConfig::from_json(&text)?;
    cfg.experiment = kind;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<()> {
    for (name, content) in &outputs.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn execute(args: &RunArgs, kind: ExperimentKind) -> Result<i32> {
    let cfg = load(args, kind)?;
    let outputs = match args.jobs {
        Some(jobs) => experiment::run_with_jobs(&cfg, jobs)?,
        None => experiment::run(&cfg)?,
    };
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    write_outputs(&dir, &outputs)?;
    let code = outputs.status.exit_code();
    if code != 0 {
        eprintln!("finished with status {:?}", outputs.status);
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, kind) = match &cli.command {
        Command::Solve(a) => (a, ExperimentKind::Solve),
        Command::Sweep(a) => (a, ExperimentKind::Sweep),
        Command::Geometry(a) => (a, ExperimentKind::Geometry),
        Command::Validate(a) => (a, ExperimentKind::Validate),
    };
    match execute(args, kind) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
