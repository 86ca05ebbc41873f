use std::path::PathBuf;
use std::process::ExitCode;

use activetest_cli::config::ExperimentConfig;
use activetest_cli::experiment::{run_experiment, summarize};
use activetest_cli::report::{self, read_run_dir, summary_csv, write_all, SUMMARY_FILE};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "activetest",
    version,
    about = "Active sequential two-sample testing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write summary.csv, raw.jsonl and tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute the summary from raw.jsonl, check it and print the tables.
    Tables {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Evaluate the LP, closed form and power bounds of a discrete scenario.
    Theory {
        #[arg(long)]
        scenario: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("cannot configure the thread pool")?;
            }
            let (manifest, raw) = run_experiment(&cfg, |line| eprintln!("{line}"))?;
            let failed = raw.iter().filter(|r| r.record.is_none()).count();
            let rows = summarize(&manifest, &raw)?;
            write_all(&out, &manifest, &raw, &rows)?;
            if failed > 0 {
                eprintln!("{failed} of {} runs failed and were excluded", raw.len());
            }
            eprintln!("wrote {} summary rows to {}", rows.len(), out.display());
        }
        Command::Tables { input } => {
            let (manifest, raw) = read_run_dir(&input)?;
            let rows = summarize(&manifest, &raw)?;
            let recomputed = summary_csv(&rows)?;
            let path = input.join(SUMMARY_FILE);
            let stored =
                std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
            print!("{}", report::tables(&manifest, &rows));
            if stored != recomputed {
                anyhow::bail!(
                    "{} differs from the summary recomputed from raw runs",
                    path.display()
                );
            }
            eprintln!("{} reproduced from raw runs", path.display());
        }
        Command::Theory { scenario, json } => {
            let text = std::fs::read_to_string(&scenario)
                .with_context(|| format!("cannot read {}", scenario.display()))?;
            let r = activetest_cli::theory::evaluate(&text)
                .with_context(|| format!("invalid scenario {}", scenario.display()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", activetest_cli::theory::render(&r));
            }
        }
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
