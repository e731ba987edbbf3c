//! Command-line entry points: `train` runs one seeded experiment arm into a
//! run directory; `compare` summarizes finished runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evorl::harness::{compare_runs, run_experiment, Arm, RunManifest};
use evorl::ErlConfig;

#[derive(Parser)]
#[command(name = "evorl", version, about = "Evolutionary reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm arm with one seed and write a run directory.
    Train(TrainArgs),
    /// Summarize finished runs: steps-to-threshold and final scores per arm.
    Compare(CompareArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file (TOML); defaults apply for every omitted key.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Algorithm arm: erl, ddpg, ea or erl-ns.
    #[arg(long, value_parser = parse_arm)]
    algo: Arm,

    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Cumulative env-step budget; overrides the config's `step_budget`.
    #[arg(long)]
    steps: Option<u64>,

    /// Output run directory.
    #[arg(long)]
    out: PathBuf,

    /// Evaluate population members on parallel workers.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories produced by `train`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,

    /// Champion-score threshold counting a task as solved.
    #[arg(long, default_value_t = -200.0, allow_hyphen_values = true)]
    threshold: f64,
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn train(args: TrainArgs) -> evorl::Result<()> {
    let mut config = match &args.config {
        Some(path) => ErlConfig::load(path)?,
        None => ErlConfig::default(),
    };
    if let Some(steps) = args.steps {
        config.step_budget = steps;
    }
    if args.parallel {
        config.parallel_eval = true;
    }
    let seed = args.seed.unwrap_or(config.seed);
    let manifest = RunManifest::new(config, args.algo, seed);
    let dir = run_experiment(manifest, &args.out)?;
    let (_, curve) = evorl::harness::read_run(&dir)?;
    if let Some(last) = curve.last() {
        println!(
            "run complete: {} | {} generations, {} steps, final champion score {:.2}",
            dir.display(),
            last.generation,
            last.cumulative_steps,
            last.champion_score
        );
    }
    Ok(())
}

fn compare(args: CompareArgs) -> evorl::Result<()> {
    let table = compare_runs(&args.runs, args.threshold)?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Compare(args) => compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
