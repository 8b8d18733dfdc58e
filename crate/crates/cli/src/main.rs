use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acr_cli::commands::{self, AnalyzeArgs};

#[derive(Parser)]
#[command(
    name = "acr",
    version,
    about = "Measure and predict the average convergence rate of evolutionary searches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte-Carlo experiment and write rate curves
    Estimate {
        /// Experiment config (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; results are identical for any value
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Exactly analyze an absorbing search chain
    Analyze {
        /// Config with a `chain` section
        #[arg(long)]
        config: Option<PathBuf>,
        /// Shortcut: build the n-bit counting chain instead of a config
        #[arg(long, value_name = "N")]
        onemax: Option<usize>,
        /// Chain representation: lumped or full
        #[arg(long)]
        variant: Option<String>,
        /// Initial distribution: uniform, perron, or point:K
        #[arg(long)]
        init: Option<String>,
        /// Window width for the optimum-free estimator
        #[arg(long, value_name = "D")]
        delta_t: Option<usize>,
        /// Horizon for the exact curves
        #[arg(long, value_name = "T")]
        t_max: Option<usize>,
        /// Also write curves.csv, .dat series, and report.json here
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run two experiments and tabulate their rates side by side
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        /// Worker threads; results are identical for any value
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a transition model as interchange JSON
    Chain {
        #[command(subcommand)]
        target: ChainTarget,
    },
}

#[derive(Subcommand)]
enum ChainTarget {
    /// The bit-counting chain of the one-bit search
    Onemax {
        /// Bit-string length
        #[arg(long)]
        n: usize,
        /// lumped (n states) or full (2^n - 1 states)
        #[arg(long, default_value = "lumped")]
        variant: String,
        /// Output path for the model JSON
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate { config, jobs } => commands::cmd_estimate(&config, jobs),
        Command::Analyze {
            config,
            onemax,
            variant,
            init,
            delta_t,
            t_max,
            out_dir,
        } => commands::cmd_analyze(&AnalyzeArgs {
            config,
            onemax,
            variant,
            init,
            delta_t,
            t_max,
            out_dir,
        }),
        Command::Compare {
            config_a,
            config_b,
            jobs,
            out,
        } => commands::cmd_compare(&config_a, &config_b, jobs, out.as_deref()),
        Command::Chain {
            target: ChainTarget::Onemax { n, variant, out },
        } => commands::cmd_chain_export(n, &variant, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
