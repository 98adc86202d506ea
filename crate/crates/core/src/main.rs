use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vfair::harness::{
    aggregate, emit_loss_curve, load_records, run_experiment, training_split, write_aggregate_csv, write_outputs,
    ExperimentConfig, RunRecord,
};
use vfair::metrics::{random_partition_rank, MethodPredictions, TudCenter};
use vfair::{Error, Result};

#[derive(Parser)]
#[command(name = "vfair", version, about = "Fair training without demographics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Center {
    Global,
    GroupMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured method and seed, write run JSONs, traces and
    /// an aggregate CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Average ranks of stored runs over random partitions of the test set.
    Rank {
        /// Run JSON files or directories holding them.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Which training seed's runs to rank; defaults to the smallest.
        #[arg(long)]
        run_seed: Option<u64>,
        #[arg(long, value_enum, default_value = "global")]
        tud_center: Center,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sorted per-example loss curve of a stored run.
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: Side,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate stored runs with significance against ERM.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Report means, stds and improvements multiplied by 100.
        #[arg(long)]
        percent: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn train(config: PathBuf, out: PathBuf) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&config)?;
    let mut records = run_experiment(&cfg)?;
    write_outputs(&mut records, &out)?;
    for r in &records {
        match &r.status {
            vfair::harness::RunStatus::Ok => {
                let summary: Vec<String> = r
                    .metrics
                    .iter()
                    .map(|(attr, m)| format!("{attr}: utility {:.4} mud {:.4} var {:.4}", m.utility, m.mud, m.var))
                    .collect();
                println!(
                    "{} seed {} epoch {}: {}",
                    r.method.name(),
                    r.seed,
                    r.selected_epoch.unwrap_or(0),
                    summary.join("; ")
                );
            }
            vfair::harness::RunStatus::Failed(reason) => {
                println!("{} seed {} FAILED: {reason}", r.method.name(), r.seed)
            }
        }
    }
    println!("wrote {} runs to {}", records.len(), out.display());
    Ok(())
}

fn rank(
    runs: Vec<PathBuf>,
    k: usize,
    trials: usize,
    seed: u64,
    run_seed: Option<u64>,
    center: Center,
    out: Option<PathBuf>,
) -> Result<()> {
    let records: Vec<RunRecord> = load_records(&runs)?.into_iter().filter(RunRecord::is_ok).collect();
    let chosen = run_seed
        .or_else(|| records.iter().map(|r| r.seed).min())
        .ok_or_else(|| Error::Data("no successful runs found".into()))?;
    let selected: Vec<&RunRecord> = records.iter().filter(|r| r.seed == chosen).collect();
    let first = selected
        .first()
        .ok_or_else(|| Error::Data(format!("no runs with seed {chosen}")))?;
    if selected.iter().any(|r| r.test_targets != first.test_targets) {
        return Err(Error::Data("runs were evaluated on different test sets".into()));
    }
    let methods: Vec<MethodPredictions> = selected
        .iter()
        .map(|r| MethodPredictions {
            name: r.method.name().to_string(),
            predictions: r.test_predictions.clone(),
        })
        .collect();
    let center = match center {
        Center::Global => TudCenter::Global,
        Center::GroupMean => TudCenter::GroupMean,
    };
    let table = random_partition_rank(&methods, &first.test_targets, k, trials, seed, first.utility_kind, center)?;
    table.write_csv(output(&out)?)
}

fn curve(config: PathBuf, run: PathBuf, side: Side, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&config)?;
    let record = load_records(&[run])?.pop().expect("one file, one record");
    let (Some(spec), Some(params)) = (&record.model, &record.params) else {
        return Err(Error::Data("run has no trained parameters".into()));
    };
    let dataset = cfg.load_dataset()?;
    let (train_set, test_set) = training_split(&cfg, &dataset, record.seed)?;
    let data = match side {
        Side::Train => train_set,
        Side::Test => test_set,
    };
    emit_loss_curve(spec, params, &data, output(&out)?)?;
    Ok(())
}

fn compare(runs: Vec<PathBuf>, percent: bool, out: Option<PathBuf>) -> Result<()> {
    let records = load_records(&runs)?;
    let rows = aggregate(&records);
    write_aggregate_csv(&rows, if percent { 100.0 } else { 1.0 }, output(&out)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out } => train(config, out),
        Command::Rank {
            runs,
            k,
            trials,
            seed,
            run_seed,
            tud_center,
            out,
        } => rank(runs, k, trials, seed, run_seed, tud_center, out),
        Command::Curve {
            config,
            run,
            split,
            out,
        } => curve(config, run, split, out),
        Command::Compare { runs, percent, out } => compare(runs, percent, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
