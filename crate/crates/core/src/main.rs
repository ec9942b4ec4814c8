use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stillbench::harness::{emit_report, EvalReport, ExperimentConfig, Pipeline, ReportFormat};
use stillbench::io::read_json;
use stillbench::Result;

/// Static-bias benchmarks and StillMix experiments on a synthetic world.
#[derive(Parser)]
#[command(name = "stillbench", version)]
struct Cli {
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data generation and batch preparation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic world and write it as a dataset.
    GenWorld,
    /// Build SCUB and SCUF sets from the test split.
    BuildBench,
    /// Train the single-frame reference network.
    TrainRef,
    /// Build the bank of confidently classified frames.
    BuildBank,
    /// Train the main network for every method and seed.
    Train,
    /// Evaluate trained networks and write the report.
    Eval,
    /// The whole pipeline, reusing cached stages.
    Run,
    /// Print an existing report and rewrite its CSV and text forms.
    Report,
    /// Print the effective config as JSON.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let config = load_config(&cli)?;
    if let Command::Config = cli.command {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    if let Command::Report = cli.command {
        let report: EvalReport = read_json(&config.out.join(ReportFormat::Json.file_name()))?;
        emit_report(&report, &config.out, &[ReportFormat::Csv, ReportFormat::Table])?;
        print!("{}", report.to_table());
        return Ok(());
    }
    let mut p = Pipeline::new(config)?;
    let out = p.out().to_path_buf();
    match cli.command {
        Command::GenWorld => {
            p.world()?;
            println!("{}", out.join("world").display());
        }
        Command::BuildBench => {
            let world = p.world()?;
            for set in p.benches(&world)?.value {
                println!("{} ({} clips)", set.name, set.len());
            }
        }
        Command::TrainRef => {
            let world = p.world()?;
            p.reference(&world)?;
            println!("{}", out.join("reference").display());
        }
        Command::BuildBank => {
            let world = p.world()?;
            let reference = p.reference(&world)?;
            let bank = p.bank(&world, &reference)?;
            println!("{} frames ({})", bank.value.len(), out.join("bank").display());
        }
        Command::Train => {
            for (method, seed, _) in p.train_all()? {
                println!("trained {} seed {seed}", method.name());
            }
        }
        Command::Eval | Command::Run => {
            p.allow_training(matches!(cli.command, Command::Run));
            let report = p.run()?;
            print!("{}", report.to_table());
        }
        Command::Report | Command::Config => unreachable!(),
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
            ExitCode::FAILURE
        }
    }
}
