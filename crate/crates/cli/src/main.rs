//! `biokg` command-line front end.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use biokg::planner::{DecisionProblem, ProblemKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::FitMethod;
use config::{RunConfig, Scale};

#[derive(Parser)]
#[command(name = "biokg", version, about = "Bioprocess hybrid model: simulate, fit, plan and run experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; missing sections take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides io.out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment size preset.
    #[arg(long, global = true, value_enum)]
    scale: Option<Scale>,
    /// Re-check hashes and digests of the outputs after writing.
    #[arg(long, global = true)]
    verify: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Exchange,
    Expansion,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth batches.
    Simulate {
        /// Number of batches; overrides simulate.m.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Fit the hybrid model (abc) or the deterministic ODE (ls).
    Fit {
        #[arg(long, value_enum)]
        method: FitMethod,
        /// Directory of trajectory CSVs; overrides io.data_dir.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Rank open-loop schedules and run the greedy controller.
    Plan {
        /// Model artifact from `fit`, or `truth` for the ground-truth process.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        problem: Option<ProblemArg>,
    },
    /// Run the prediction and decision experiments.
    Experiment,
    /// Check every manifest in a directory.
    Verify { dir: PathBuf },
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::load(cli.common.config.as_deref())?;
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.common.out {
        config.io.out_dir = Some(out.clone());
    }
    if let Some(scale) = cli.common.scale {
        config.apply_scale(scale);
    }
    match &cli.command {
        Command::Simulate { m: Some(m) } => config.simulate.m = *m,
        Command::Fit { data: Some(d), .. } => config.io.data_dir = Some(d.clone()),
        Command::Plan { model, problem } => {
            if let Some(m) = model {
                config.io.model = Some(m.clone());
            }
            if let Some(p) = problem {
                let kind = match p {
                    ProblemArg::Exchange => ProblemKind::MediumExchange,
                    ProblemArg::Expansion => ProblemKind::Expansion,
                };
                if kind != config.problem.kind {
                    config.problem = DecisionProblem::new(kind);
                }
            }
        }
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    if let Command::Verify { dir } = &cli.command {
        let n = provenance::verify_dir(dir)?;
        println!("verified {n} files in {}", dir.display());
        return Ok(());
    }
    let config = resolve(&cli)?;
    let manifest = match &cli.command {
        Command::Simulate { .. } => commands::simulate(&config)?,
        Command::Fit { method, .. } => commands::fit(&config, *method)?,
        Command::Plan { .. } => commands::plan(&config)?,
        Command::Experiment => commands::experiment(&config)?,
        Command::Verify { .. } => unreachable!("handled above"),
    };
    println!("wrote {}", manifest.display());
    if cli.common.verify {
        let dir = manifest.parent().expect("manifest lives in the output directory");
        let n = provenance::verify_dir(dir)?;
        println!("verified {n} files");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
