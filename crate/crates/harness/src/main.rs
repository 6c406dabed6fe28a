use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cfmimo_harness::{emit_results, load_config, oracles, run_experiment, Format, SimConfig, EXPERIMENTS};
use clap::{Parser, Subcommand};

/// Worker-thread count; unset uses every core.
const WORKERS_ENV: &str = "CFMIMO_WORKERS";

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Cell-free massive MIMO spectral-efficiency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its table.
    Run {
        experiment: String,
        /// TOML configuration; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Run the built-in oracle checks.
    Validate,
    /// List experiment names.
    List,
}

fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::List => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<28}{about}");
            }
        }
        Command::Run {
            experiment,
            config,
            seed,
            trials,
            out,
            format,
        } => {
            let mut cfg = match config {
                Some(p) => load_config(&p)?,
                None => SimConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let table = run_experiment(&experiment, &cfg)?;
            emit_results(&table, format, &out)?;
            log::info!("wrote {} rows to {}", table.rows.len(), out.display());
        }
        Command::Validate => {
            let mut failed = Vec::new();
            for c in oracles::run_suite() {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                if !c.passed {
                    failed.push(c.name);
                }
            }
            if !failed.is_empty() {
                eprintln!("failed invariant(s): {}", failed.join(", "));
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match init_workers().and_then(|_| run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
