//! `radarclass`: run the classification pipeline from a config file.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 bad or missing input
//! data, 3 internal error, 4 hash mismatch against the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radarclass::pipeline::{self, ExperimentConfig, SavedModel, Stage, StageStatus};
use radarclass::synthgen::{generate_feature_benchmark, BenchmarkConfig};
use radarclass::Error;

#[derive(Parser)]
#[command(name = "radarclass", version, about = "Road-user classification from radar cluster samples")]
struct Cli {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic target stream.
    Generate {
        /// Write a feature-selection benchmark (CSV plus declaration) into
        /// this directory instead.
        #[arg(long)]
        feature_benchmark: Option<PathBuf>,
    },
    /// Cluster targets with DBSCAN.
    Cluster,
    /// Cut cluster samples and extract features.
    Extract,
    /// Rank features by backward elimination and pick a subset.
    Select,
    /// Train the configured model on all samples.
    Train,
    /// Cross-validate the configured configurations.
    Evaluate,
    /// Run every stage.
    Run,
    /// Score a feature CSV with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::UnknownBaseline(_) => 1,
        Error::HashMismatch { .. } => 4,
        Error::Io(_) => 3,
        _ => 2,
    }
}

fn load_config(cli: &Cli) -> radarclass::Result<ExperimentConfig> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_stages(cfg: &ExperimentConfig, targets: &[Stage]) -> radarclass::Result<()> {
    let summary = pipeline::run(cfg, targets)?;
    for (stage, status) in summary.stages {
        let word = match status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "skipped",
        };
        eprintln!("{:<9} {word}", stage.name());
    }
    Ok(())
}

fn predict(model: &Path, features: &Path, out: Option<&Path>) -> radarclass::Result<()> {
    let model = SavedModel::load_json(model)?;
    let table = pipeline::read_features(features)?;
    let rows = pipeline::predict(&model, &table)?;
    let n_classes = model.model.n_classes();
    match out {
        Some(path) => {
            let f = std::io::BufWriter::new(std::fs::File::create(path)?);
            pipeline::write_predictions_csv(f, n_classes, &rows)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            pipeline::write_predictions_csv(&mut lock, n_classes, &rows)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn execute(cli: &Cli) -> radarclass::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--jobs: {e}")))?;
    }
    match &cli.command {
        Command::Predict { model, features, out } => predict(model, features, out.as_deref()),
        Command::Generate {
            feature_benchmark: Some(dir),
        } => {
            let cfg = load_config(cli)?;
            std::fs::create_dir_all(dir)?;
            let bench = BenchmarkConfig {
                scene: cfg.scene,
                ..BenchmarkConfig::default()
            };
            generate_feature_benchmark(&bench)?.write(dir, "benchmark")
        }
        command => {
            let cfg = load_config(cli)?;
            let targets: &[Stage] = match command {
                Command::Generate { .. } => &[Stage::Generate],
                Command::Cluster => &[Stage::Cluster],
                Command::Extract => &[Stage::Extract],
                Command::Select => &[Stage::Select],
                Command::Train => &[Stage::Train],
                Command::Evaluate => &[Stage::Evaluate],
                Command::Run if cfg.selection.is_some() => &[Stage::Select, Stage::Evaluate, Stage::Train],
                Command::Run => &[Stage::Evaluate, Stage::Train],
                Command::Predict { .. } => unreachable!("handled above"),
            };
            run_stages(&cfg, targets)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
