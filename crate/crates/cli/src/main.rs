use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirtplan::config::RunConfig;
use dirtplan::pipeline::{write_error_report, ErrorReport, Pipeline, Stage};
use dirtplan::Error;

/// Dirt-aware partitioning and route planning for cleaning robot teams.
#[derive(Parser)]
#[command(name = "dirtplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate dirt levels and write dirtmap.json.
    Estimate(Common),
    /// Split the free space into balanced regions (partition.json).
    Partition(Common),
    /// Plan one route per region (routes.json).
    Plan(Common),
    /// Simulate the team and the single-robot baseline (report.json).
    Simulate(Common),
    /// Compare team and baseline (comparison.json).
    Compare(Common),
    /// All stages in order.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file of key = value lines.
    #[arg(long)]
    config: PathBuf,
    /// Override the number of robots.
    #[arg(long)]
    robots: Option<usize>,
    /// Override the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Stage, Common) {
        match self {
            Command::Estimate(c) => (Stage::Estimate, c),
            Command::Partition(c) => (Stage::Partition, c),
            Command::Plan(c) => (Stage::Plan, c),
            Command::Simulate(c) => (Stage::Simulate, c),
            Command::Compare(c) => (Stage::Compare, c),
            Command::Run(c) => (Stage::Run, c),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(r) = common.robots {
        cfg.robots = r;
    }
    if let Some(s) = common.seed {
        cfg.sim.rng_seed = s;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let (stage, common) = Cli::parse().command.split();
    let mut out_dir = common.out.clone();
    let result = load(&common).and_then(|cfg| {
        out_dir = Some(cfg.output_dir.clone());
        Pipeline::new(&cfg)?.run(stage)
    });
    match result {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let report = ErrorReport::new(stage, &err);
            eprintln!("dirtplan {stage}: {err}");
            if let Some(dir) = out_dir {
                if let Err(e) = write_error_report(&dir, &report) {
                    eprintln!("dirtplan {stage}: could not write error report: {e}");
                }
            }
            ExitCode::from(report.exit_code as u8)
        }
    }
}
