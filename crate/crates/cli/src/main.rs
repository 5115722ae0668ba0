use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use structal::config::load_run_config;
use structal::corpus::{load_column_tagging, load_conllu, ColumnOptions};
use structal::ie::{evaluate_ie, read_ie_jsonl, IeModels, RelationModel};
use structal::learner::{featurize_corpus, Model};
use structal::{eval, report, runner};

/// Active-learning simulations for structured prediction.
#[derive(Parser)]
#[command(name = "structal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalTask {
    Tagging,
    Parsing,
    Ie,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed (others are left untouched).
        #[arg(long)]
        seed_filter: Option<u64>,
    },
    /// Plot learning curves of finished runs.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on a corpus and print the metrics as JSON.
    Evaluate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: EvalTask,
        /// Relation model for `--task ie`.
        #[arg(long)]
        relation_params: Option<PathBuf>,
    },
}

fn simulate(config: PathBuf, seed_filter: Option<u64>) -> Result<()> {
    let spec = load_run_config(&config)?;
    let outcome = runner::run_spec(&spec, seed_filter)?;
    info!(
        "{}: computed seeds {:?}, reused {:?}",
        spec.run_dir().display(),
        outcome.computed,
        outcome.resumed
    );
    if outcome.aggregated {
        println!("{}", spec.run_dir().join(runner::AGGREGATE_FILE).display());
    }
    Ok(())
}

fn evaluate(params: PathBuf, data: PathBuf, task: EvalTask, relation_params: Option<PathBuf>) -> Result<()> {
    let model = Model::load(&params)?;
    let report = match task {
        EvalTask::Tagging | EvalTask::Parsing => {
            let corpus = match task {
                EvalTask::Tagging => load_column_tagging(&data, ColumnOptions::default())?,
                _ => load_conllu(&data)?,
            };
            let feats = featurize_corpus(&corpus);
            let all: Vec<usize> = (0..corpus.len()).collect();
            eval::evaluate(&model, &corpus, &feats, &all)?
        }
        EvalTask::Ie => {
            let Some(rel) = relation_params else {
                bail!(structal::Error::Config {
                    field: "relation_params".into(),
                    message: "required for --task ie".into(),
                });
            };
            let corpus = read_ie_jsonl(&data)?;
            let feats = featurize_corpus(&corpus.tagging_view());
            let models = IeModels {
                mention: model,
                relation: RelationModel::load(&rel)?,
            };
            let all: Vec<usize> = (0..corpus.len()).collect();
            evaluate_ie(&models, &corpus, &feats, &all)?
        }
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed_filter } => {
            simulate(config.clone(), seed_filter).with_context(|| format!("simulate {}", config.display()))
        }
        Command::Report { runs, out } => {
            let dirs: Vec<&std::path::Path> = runs.iter().map(PathBuf::as_path).collect();
            for path in report::write_report(&dirs, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Evaluate {
            params,
            data,
            task,
            relation_params,
        } => evaluate(params, data, task, relation_params),
    }
}

/// Configuration problems exit with 2, like usage errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<structal::Error>() {
        Some(structal::Error::Config { .. } | structal::Error::Parse { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if std::env::var("STRUCTAL_DETERMINISTIC").is_ok_and(|v| v == "1") {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(1).build_global() {
            eprintln!("warning: could not pin the thread pool: {e}");
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
