use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rollcast::commands::{self, forecast_csv, TrainRequest};
use rollcast::config::ExperimentConfig;
use rollcast::exit_code;
use rollcast_core::datapipe::FeatureScenario;
use rollcast_core::models::ModelKind;
use rollcast_core::textio::write_string;
use rollcast_core::Result;

/// Multi-step ship roll forecasting: simulate surrogate records, train
/// forecasters, and run the feature ablation and model comparison.
#[derive(Parser, Debug)]
#[command(name = "rollcast", version)]
struct Cli {
    /// Experiment configuration (TOML, or JSON if the extension is .json).
    /// Defaults to the shipped configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configuration's output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Worker threads for the training grid.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the seed list, e.g. `--seeds 1,2,3`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one motion record per heading.
    Simulate {
        /// Wave heading in degrees; repeatable. Defaults to the configured trio.
        #[arg(long = "heading")]
        headings: Vec<f64>,
        /// Wave phase seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV records and their sidecars.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature-space ablation with the LSTM learner.
    Ablate(GridArgs),
    /// Compare the fusion network against the LSTM and CNN baselines.
    Compare(GridArgs),
    /// Train a single model and write a checkpoint.
    Train {
        /// Dataset label (e.g. dataset#1) or path to a record CSV.
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "convlstmp")]
        model: ModelKind,
        #[arg(long)]
        scenario: Option<FeatureScenario>,
        /// Horizon p; the lag d equals it.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Checkpoint directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on the validation part of a record.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset label or path to a record CSV.
        #[arg(long)]
        data: String,
        /// Directory for report.json, CSV and plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forecast p steps past the last row of a record-format CSV.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with header t,roll_deg,wave1,wave2,wave3.
        #[arg(long)]
        window: PathBuf,
        /// Write the forecast here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::shipped(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn apply_grid(cfg: &mut ExperimentConfig, args: &GridArgs) -> Result<()> {
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    cfg.validate()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate { headings, seed, out } => {
            let hs = (!headings.is_empty()).then_some(headings.as_slice());
            for r in commands::cmd_simulate(&cfg, hs, seed, out.as_deref())? {
                println!(
                    "{}\theading {}\tmax |roll| {:.3} deg\t{}",
                    r.label,
                    r.heading,
                    r.max_abs_roll_deg,
                    r.path.display()
                );
            }
        }
        Command::Ablate(args) => {
            apply_grid(&mut cfg, &args)?;
            let result = commands::cmd_ablate(&cfg, args.jobs)?;
            for s in &result.summary {
                println!(
                    "{}\t{}\tp={}\tmedian average RMSE {:.5} deg",
                    s.dataset, s.scenario, s.horizon, s.median_average_rmse
                );
            }
        }
        Command::Compare(args) => {
            apply_grid(&mut cfg, &args)?;
            let result = commands::cmd_compare(&cfg, args.jobs)?;
            for r in &result.rankings {
                let order: Vec<String> = r.order.iter().map(|(k, v)| format!("{k} {v:.5}")).collect();
                println!("{}\tp={}\t{}", r.dataset, r.horizon, order.join(" < "));
            }
        }
        Command::Train {
            data,
            model,
            scenario,
            horizon,
            seed,
            epochs,
            out,
        } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            let req = TrainRequest {
                source: &data,
                model,
                scenario: scenario.unwrap_or(cfg.pipeline.scenario),
                horizon: horizon.unwrap_or(cfg.pipeline.horizon),
                seed,
                out_dir: &out,
            };
            let cell = commands::cmd_train(&cfg, &req)?;
            println!(
                "trained {} epochs (best {}), validation average RMSE {:.5} deg -> {}",
                cell.history.epochs.len(),
                cell.history.best_epoch,
                cell.report.average_rmse,
                out.display()
            );
        }
        Command::Evaluate { checkpoint, data, out } => {
            let report = commands::cmd_evaluate(&cfg, &checkpoint, &data, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Predict { checkpoint, window, out } => {
            let csv = forecast_csv(&commands::cmd_predict(&checkpoint, &window)?);
            match out {
                Some(path) => write_string(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::ShowConfig => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
