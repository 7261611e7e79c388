use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use spikewin::{load_config, run_suite, Suite};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Couple,
    Chain,
    Analytic,
    Verify,
}

impl From<Command> for Suite {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Suite::Simulate,
            Command::Couple => Suite::Couple,
            Command::Chain => Suite::Chain,
            Command::Analytic => Suite::Analytic,
            Command::Verify => Suite::Verify,
        }
    }
}

/// Stationary laws of bounded-memory Poisson neuron networks.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output.dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let suite = Suite::from(cli.command);
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir)).join(suite.name());
    if !cli.quiet {
        println!("# effective configuration (hash {})\n{}", cfg.hash(), cfg.to_toml());
    }
    match run_suite(&cfg, suite, &out) {
        Ok(summary) => {
            if !cli.quiet {
                print!("{}", summary.table());
                println!("artifacts: {}", out.display());
            }
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                for c in summary.failures() {
                    eprintln!("FAIL {}: {} vs {} ({})", c.name, c.value, c.limit, c.rule);
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
