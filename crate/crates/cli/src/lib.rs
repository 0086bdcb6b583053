//! The `mugrep` command. Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mugrep::appraisal::{AppraisalEngine, AppraisalRequest};
use mugrep::data::{load_dataset, AttributeValue, Day, EstateAttributes};
use mugrep::features::{FeatureBuilder, FEATURES_FILE};
use mugrep::graph::{EventGraph, IntraIndex, COMMUNITY_EDGES_FILE, EVENT_GRAPH_FILE, INTRA_INDEX_FILE};
use mugrep::model::{Checkpoint, CHECKPOINT_FILE};
use mugrep::synth;
use mugrep::train::{
    checkpoint, evaluate, hetero_edges_for, run_ablation_suite, train, write_ablation_table, Experiment, Variant,
    ABLATION_TABLE_FILE, COMMUNITY_MAPE_FILE, METRICS_FILE, TRAIN_LOG_FILE,
};
use mugrep::MugrepError;

mod config;

pub use config::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Raw feature rows, one per transaction, before normalization.
pub const FEATURE_ROWS_FILE: &str = "features.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] MugrepError),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mugrep",
    version,
    about = "Real estate appraisal with multi-source urban graphs"
)]
pub struct Cli {
    /// Seed for every randomized stage; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with [generator], [graph] and [train] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic city to --out.
    Generate,
    /// Print dataset counts as JSON.
    Describe { dataset: PathBuf },
    /// Write the feature layout manifest and raw feature rows.
    Features { dataset: PathBuf },
    /// Write the event graph, intra-community index and hetero edges.
    Graphs { dataset: PathBuf },
    /// Train and write the checkpoint and training log.
    Train {
        dataset: PathBuf,
        /// Model or feature ablation to train instead of the full model.
        #[arg(long, default_value = "full")]
        variant: Variant,
    },
    /// Score a checkpoint on the test split; writes metrics.json and community_mape.csv.
    Evaluate {
        dataset: PathBuf,
        /// Defaults to model.ckpt.json under --out.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train each variant under each seed; writes ablation_table.csv.
    Ablate {
        dataset: PathBuf,
        /// Comma-separated, e.g. full,noEvt,noCom. Defaults to the nine MugRep variants.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        /// Comma-separated training seeds. Defaults to --seed or the configured seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Value one property and print the response as JSON.
    Appraise(AppraiseArgs),
    /// Serve the HTTP API.
    Serve {
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Listen address.
        #[arg(long, env = mugrep_service::ADDR_ENV, default_value = mugrep_service::DEFAULT_ADDR)]
        addr: String,
    },
}

#[derive(Debug, Args)]
pub struct AppraiseArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON request body, as accepted by POST /api/appraise.
    #[arg(long, conflicts_with_all = ["community", "attr", "date"])]
    pub request: Option<PathBuf>,
    #[arg(long, required_unless_present = "request")]
    pub community: Option<u32>,
    /// Estate attribute as name=value; repeatable.
    #[arg(long, value_parser = parse_attr)]
    pub attr: Vec<(String, AttributeValue)>,
    #[arg(long)]
    pub date: Option<Day>,
}

fn parse_attr(s: &str) -> Result<(String, AttributeValue), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let value = v
        .parse::<f64>()
        .map(AttributeValue::Number)
        .unwrap_or_else(|_| AttributeValue::Category(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = PipelineConfig::load(cli.config.as_deref())?.with_seed(cli.seed);
    let out = cli.out.as_path();
    match cli.command {
        Command::Generate => {
            let dataset = synth::generate(&config.generator, out)?;
            print_json(&synth::summarize(&dataset))
        }
        Command::Describe { dataset } => print_json(&synth::describe(&dataset)?),
        Command::Features { dataset } => {
            let ds = load_dataset(&dataset)?;
            let fb = FeatureBuilder::new(&ds, config.train.groups);
            create_dir(out)?;
            fb.layout().write_manifest(&out.join(FEATURES_FILE))?;
            let path = out.join(FEATURE_ROWS_FILE);
            let mut w = csv::Writer::from_path(&path).map_err(MugrepError::from)?;
            let mut header = vec!["event_id".to_string()];
            header.extend(
                fb.layout()
                    .slots
                    .iter()
                    .map(|s| format!("{}.{}", s.group.name(), s.name)),
            );
            w.write_record(&header).map_err(MugrepError::from)?;
            for (e, row) in ds.events.iter().zip(fb.assemble_all(&ds.events)?) {
                let mut rec = vec![e.id.to_string()];
                rec.extend(row.iter().map(f64::to_string));
                w.write_record(&rec).map_err(MugrepError::from)?;
            }
            w.flush().map_err(io_err(&path))
        }
        Command::Graphs { dataset } => {
            let ds = load_dataset(&dataset)?;
            let hyper = config.train.hyperparams;
            hyper.validate()?;
            create_dir(out)?;
            EventGraph::build(&hyper, &ds.events)?.write_binary(&out.join(EVENT_GRAPH_FILE))?;
            IntraIndex::build(&ds.events).write_binary(&out.join(INTRA_INDEX_FILE))?;
            let fb = FeatureBuilder::new(&ds, config.train.groups);
            hetero_edges_for(&ds, fb.blocks(), config.train.groups, hyper.sim_quantile)?
                .write_json(&out.join(COMMUNITY_EDGES_FILE))?;
            Ok(())
        }
        Command::Train { dataset, variant } => {
            if matches!(variant, Variant::Ha | Variant::Lr) {
                return Err(CliError::Usage(format!("{variant} has no checkpoint; use ablate")));
            }
            let ds = load_dataset(&dataset)?;
            let tc = variant.configure(&config.train);
            let exp = Experiment::prepare(&ds, &tc)?;
            let outcome = if variant == Variant::Dnn {
                mugrep::train::baseline_dnn(&exp, &tc)?
            } else {
                train(&exp, &tc)?
            };
            create_dir(out)?;
            checkpoint(&outcome.model, &exp, &tc).write(&out.join(CHECKPOINT_FILE))?;
            outcome.write_log(&out.join(TRAIN_LOG_FILE))?;
            eprintln!(
                "best epoch {} of {}, validation mse {:.6}",
                outcome.best_epoch,
                outcome.log.len() - 1,
                outcome.log[outcome.best_epoch].val_loss
            );
            Ok(())
        }
        Command::Evaluate { dataset, checkpoint } => {
            let ds = load_dataset(&dataset)?;
            let ckpt = Checkpoint::read(&checkpoint.unwrap_or_else(|| out.join(CHECKPOINT_FILE)))?;
            let exp = Experiment::for_checkpoint(&ds, &ckpt, &config.train)?;
            let report = evaluate(&ckpt.model()?, &exp, &ds)?;
            create_dir(out)?;
            let path = out.join(METRICS_FILE);
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&report).map_err(MugrepError::from)? + "\n",
            )
            .map_err(io_err(&path))?;
            report.write_community_csv(&out.join(COMMUNITY_MAPE_FILE))?;
            print_json(&report.metrics())
        }
        Command::Ablate {
            dataset,
            variants,
            seeds,
        } => {
            let ds = load_dataset(&dataset)?;
            let variants = if variants.is_empty() {
                Variant::standard()
            } else {
                variants
            };
            let seeds = if seeds.is_empty() {
                vec![config.train.seed]
            } else {
                seeds
            };
            let rows = run_ablation_suite(&ds, &config.train, &variants, &seeds)?;
            create_dir(out)?;
            write_ablation_table(&rows, &out.join(ABLATION_TABLE_FILE))?;
            for r in &rows {
                eprintln!(
                    "{:>6} seed {:>3}  mape {:.4}  mae {:.4}  rmse {:.4}",
                    r.variant.name(),
                    r.seed,
                    r.mape,
                    r.mae,
                    r.rmse
                );
            }
            Ok(())
        }
        Command::Appraise(args) => {
            let request = appraisal_request(&args)?;
            let engine = AppraisalEngine::load(&args.dataset, &args.checkpoint)?;
            let response = engine.appraise(&request)?;
            let text = serde_json::to_string(&response).map_err(MugrepError::from)?;
            println!("{text}");
            Ok(())
        }
        Command::Serve {
            dataset,
            checkpoint,
            addr,
        } => serve(dataset, checkpoint, &addr),
    }
}

pub fn appraisal_request(args: &AppraiseArgs) -> Result<AppraisalRequest, CliError> {
    if let Some(path) = &args.request {
        let text = std::fs::read(path).map_err(io_err(path))?;
        return mugrep_service::parse_request(&text).map_err(|e| CliError::Usage(e.body.message));
    }
    let community_id = args
        .community
        .ok_or_else(|| CliError::Usage("--community or --request is required".into()))?;
    let attributes: EstateAttributes = args.attr.iter().cloned().collect();
    Ok(AppraisalRequest {
        community_id,
        valuation_date: args.date,
        attributes,
    })
}

fn serve(dataset: PathBuf, checkpoint: PathBuf, addr: &str) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(io_err(Path::new(addr)))?;
    runtime.block_on(async {
        let state = mugrep_service::AppState::loading();
        let loader = state.clone();
        let load = tokio::task::spawn_blocking(move || -> Result<(), MugrepError> {
            loader.install(AppraisalEngine::load(&dataset, &checkpoint)?);
            Ok(())
        });
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(io_err(Path::new(addr)))?;
        eprintln!("listening on http://{addr}");
        let server = mugrep_service::serve_listener(listener, state);
        tokio::pin!(server);
        tokio::select! {
            loaded = load => {
                loaded.map_err(|e| CliError::Usage(e.to_string()))??;
                eprintln!("model loaded");
                server.await.map_err(io_err(Path::new(addr)))
            }
            done = &mut server => done.map_err(io_err(Path::new(addr))),
        }
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(MugrepError::from)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}").map_err(io_err(Path::new("<stdout>")))
}
