use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gmc::experiment::{parse_config, run_and_write, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "gmc", version, about = "Gaussian multiplicative chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `replicas`.
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Parse and validate a config, printing it with defaults filled in.
    Validate { config: PathBuf },
    /// List the experiment kinds.
    ListExperiments,
}

fn load(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    parse_config(path).with_context(|| format!("invalid config {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, seed, out, replicas } => {
            let mut c = load(&config)?;
            if let Some(s) = seed {
                c.master_seed = s;
            }
            if let Some(o) = out {
                c.output_dir = o;
            }
            if let Some(r) = replicas {
                c.replicas = r;
            }
            c.validate().context("invalid overrides")?;
            let run = run_and_write(&c).context("experiment failed")?;
            for check in &run.report.checks {
                let status = if check.pass { "pass" } else { "FAIL" };
                println!("{status}  {}  value={} tolerance={}", check.name, check.value, check.tolerance);
            }
            println!(
                "{} in {:.1}s, outputs in {}",
                if run.report.pass { "PASS" } else { "FAIL" },
                run.report.elapsed_seconds,
                c.output_dir.display()
            );
            Ok(run.report.pass)
        }
        Command::Validate { config } => {
            let c = load(&config)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(true)
        }
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<22} {}", format!("{k:?}"), k.describe());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
