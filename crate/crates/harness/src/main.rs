use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use terradapt_harness::{run, ConfigError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "terradapt", version, about = "Run terradapt experiments and write CSV reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSVs and the run manifest.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,

    #[arg(long, global = true)]
    steps_per_cycle: Option<usize>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Speed over the depth x phase grid
    Sweep,
    /// Median joint torque against the granular/Coulomb blend
    ModelTorque,
    /// KNN depth classification from joint loads
    Classify,
    /// Feedback runs on constant-depth beds
    Closedloop,
    /// Adaptive and fixed gaits over a flat-to-deep ramp
    Transition,
    /// Measure the controller's load set point
    Calibrate,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Sweep => Experiment::Sweep,
            Command::ModelTorque => Experiment::ModelTorque,
            Command::Classify => Experiment::Classify,
            Command::Closedloop => Experiment::Closedloop,
            Command::Transition => Experiment::Transition,
            Command::Calibrate => Experiment::Calibrate,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(n) = cli.steps_per_cycle {
        cfg.steps_per_cycle = n;
    }
    if let Some(n) = cli.threads {
        cfg.threads = n;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = Experiment::from(cli.command);
    let cfg = match load(&cli).and_then(|c| c.validate(experiment).map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(experiment, &cfg, &cli.out) {
        Ok(outcome) => {
            print!("{}", outcome.summary());
            if let Some(t) = outcome.tau0 {
                println!("tau0 = {t:.4} %");
            }
            println!("wrote {} files to {}", outcome.files.len(), cli.out.display());
            if outcome.succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
