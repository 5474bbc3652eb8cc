use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sentiment_forecast::runner::{self, ExperimentConfig, Outcome, Overrides};
use sentiment_forecast::Error;

#[derive(Parser)]
#[command(name = "sentiment-forecast", version, about = "Next-day close forecasting from prices and post sentiment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read prices and posts, apply dedup, partitioning and sampling.
    Ingest(Common),
    /// Score posts with the lexicon or external logits.
    Score(Common),
    /// Build the feature frame of every dataset.
    Featurize(Common),
    /// Train every model on every dataset and save checkpoints.
    Train(Common),
    /// Evaluate saved checkpoints on the test split.
    Evaluate(Common),
    /// Run the whole pipeline and write reports, plots and a manifest.
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_input_error() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn run(command: Command) -> Result<Outcome, Error> {
    let (Command::Ingest(c)
    | Command::Score(c)
    | Command::Featurize(c)
    | Command::Train(c)
    | Command::Evaluate(c)
    | Command::Experiment(c)) = &command;
    let cfg = runner::load_config(&c.config, &Overrides { seed: c.seed, out: c.out.clone() })?;
    match command {
        Command::Ingest(_) => runner::run_ingest(&cfg),
        Command::Score(_) => runner::run_score(&cfg),
        Command::Featurize(_) => runner::run_featurize(&cfg),
        Command::Train(_) => runner::run_train(&cfg),
        Command::Evaluate(_) => runner::run_evaluate(&cfg),
        Command::Experiment(c) => {
            let digest = ExperimentConfig::file_digest(&c.config)?;
            let result = runner::run_experiment(&cfg, &digest)?;
            for r in &result.reports {
                println!(
                    "{:<12} {:<10} MAE {:>10.3}  RMSE {:>10.3}  R2a {:>7.3}  MAPE {:>7.3}",
                    r.dataset, r.model, r.mae, r.rmse, r.r2_adjusted, r.mape
                );
            }
            Ok(result.outcome)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => match outcome.failures.first() {
            None => ExitCode::SUCCESS,
            Some((label, err)) => {
                eprintln!("{} dataset variant(s) failed; first: {label}", outcome.failures.len());
                exit_for(err)
            }
        },
        Err(err) => exit_for(&err),
    }
}
