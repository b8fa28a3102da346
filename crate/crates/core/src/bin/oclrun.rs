//! Command-line driver for experiment grids and budget sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use online_cl::experiment::{results_root, run_budget_sweep, run_experiment, Overrides, RESULTS_ENV};
use online_cl::learner::Method;

#[derive(Parser)]
#[command(name = "oclrun", about = "Online class-incremental learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds, replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated method tags, e.g. `ours,finetune,ablation:cluster:random_replay`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated top-k values.
    #[arg(long = "top-k", value_delimiter = ',')]
    top_k: Option<Vec<usize>>,
    /// Results root.
    #[arg(long, env = RESULTS_ENV)]
    out: Option<PathBuf>,
    /// Maximum grid cells running at once (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, seed) cell of a config.
    Run {
        #[command(flatten)]
        common: Common,
        /// Exemplars per class, replacing the config's value.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Repeat the experiment for each exemplar budget and print a table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated budgets.
        #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
        budget: Vec<usize>,
    },
}

fn overrides(c: &Common, budget: Option<usize>) -> Overrides {
    Overrides {
        seeds: c.seeds.clone(),
        methods: c.methods.clone(),
        top_k: c.top_k.clone(),
        budget,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run { common, budget } => {
            let root = common.out.clone().unwrap_or_else(results_root);
            run_experiment(&common.config, &overrides(common, *budget), &root, common.jobs)
        }
        Command::Sweep { common, budget } => {
            let root = common.out.clone().unwrap_or_else(results_root);
            run_budget_sweep(&common.config, budget, &overrides(common, None), &root, common.jobs)
        }
    };
    ExitCode::from(code as u8)
}
