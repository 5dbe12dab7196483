use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hitloop_core::grammar::ExportFormat;
use hitloop_core::metrics::report::render_table;
use hitloop_core::metrics::UnitSelector;
use hitloop_core::orchestrator::adapter::AuthorAdapter;
use hitloop_core::orchestrator::strategy::StrategyKind;
use hitloop_core::orchestrator::{report_json, Orchestrator};
use hitloop_core::sim::{run_simulation, MockAuthor, MockAuthorConfig, SimConfig};
use hitloop_core::store::CorpusStore;
use hitloop_service::client::{AuthorClientConfig, HttpAuthor, NoAuthor};
use hitloop_service::{api, mock_server, LoopRequest};

#[derive(Parser)]
#[command(name = "hitloop", version, about = "Human-in-the-loop HS/CN corpus workbench")]
struct Cli {
    /// Store directory (holds events.jsonl, reports/ and training/).
    #[arg(long, global = true, default_value = "hitloop-store")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import, export and freeze versions.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Run loops.
    #[command(name = "loop", subcommand)]
    Loop(LoopCmd),
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Serve the review API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Author client config (JSON: url, timeout_secs, retries).
        #[arg(long)]
        author_config: Option<PathBuf>,
    },
    /// Serve the mock author over the wire protocol.
    MockAuthor {
        #[arg(long, default_value = "127.0.0.1:8700")]
        addr: SocketAddr,
        /// Mock author config (JSON); defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run seeded loops with the mock author and scripted reviewers into
    /// a fresh store.
    Simulate {
        /// Simulation config (JSON); defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Unit::Pair)]
        unit: Unit,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Create a version from a pair JSONL file.
    Import {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        version: String,
        #[arg(long = "predecessor")]
        predecessors: Vec<String>,
        /// Defaults to the number of accepted records.
        #[arg(long)]
        quota: Option<u32>,
        /// Freeze right after importing.
        #[arg(long)]
        freeze: bool,
    },
    /// Training export of a version and its predecessors, or its records.
    Export {
        #[arg(long)]
        version: String,
        #[arg(long, value_enum, default_value_t = Format::Plain)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Freeze {
        #[arg(long)]
        version: String,
    },
    /// List versions.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Plain,
    Labeled,
    /// Pair records as JSONL.
    Jsonl,
}

#[derive(Subcommand)]
enum LoopCmd {
    Start(StartArgs),
    Generate {
        #[arg(long = "loop")]
        name: String,
        #[arg(long, default_value_t = 1)]
        chunks: usize,
        #[arg(long)]
        author_config: PathBuf,
    },
    Close {
        #[arg(long = "loop")]
        name: String,
    },
}

#[derive(Args)]
struct StartArgs {
    #[arg(long)]
    name: String,
    #[arg(long, default_value = "plain")]
    strategy: StrategyKind,
    #[arg(long)]
    quota: Option<u32>,
    #[arg(long)]
    admit_limit: Option<usize>,
    /// Condition pool file: one text per line, optionally `label<TAB>text`.
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Label mapping JSON (external label → target); the bundled SBF
    /// mapping is used otherwise.
    #[arg(long)]
    label_mapping: Option<PathBuf>,
    /// Build on this version and its predecessors instead of all versions.
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    max_tokens: Option<usize>,
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Report of one or more frozen versions.
    Report {
        #[arg(long = "version", required = true)]
        versions: Vec<String>,
        #[arg(long, value_enum, default_value_t = Unit::Pair)]
        unit: Unit,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Pair,
    Hs,
    Cn,
}

impl From<Unit> for UnitSelector {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Pair => UnitSelector::Pair,
            Unit::Hs => UnitSelector::Hs,
            Unit::Cn => UnitSelector::Cn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn orchestrator(store: &Path, author: Arc<dyn AuthorAdapter>) -> Result<Orchestrator> {
    let store = CorpusStore::open(store).with_context(|| format!("opening store {}", store.display()))?;
    Ok(Orchestrator::new(Arc::new(store), author))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn corpus(store_dir: &Path, cmd: CorpusCmd) -> Result<()> {
    let store = CorpusStore::open(store_dir)?;
    match cmd {
        CorpusCmd::Import { file, version, predecessors, quota, freeze } => {
            let reader = BufReader::new(File::open(&file).with_context(|| format!("opening {}", file.display()))?);
            let v = store.import_pairs(reader, &version, predecessors, quota)?;
            let v = if freeze { store.freeze(&version)? } else { v };
            println!("{}", serde_json::to_string(&v)?);
        }
        CorpusCmd::Export { version, format, out } => {
            let mut w = output(out.as_deref())?;
            match format {
                Format::Plain => store.export_training(&version, ExportFormat::Plain, &mut w)?,
                Format::Labeled => store.export_training(&version, ExportFormat::Labeled, &mut w)?,
                Format::Jsonl => store.export_pairs(&version, &mut w)?,
            }
            w.flush()?;
        }
        CorpusCmd::Freeze { version } => println!("{}", serde_json::to_string(&store.freeze(&version)?)?),
        CorpusCmd::List => {
            for v in store.versions() {
                let state = if v.frozen { "frozen" } else { "open" };
                println!("{}\t{}\t{} pairs\tquota {}", v.name, state, v.pair_ids.len(), v.quota);
            }
        }
    }
    Ok(())
}

fn loop_cmd(store_dir: &Path, cmd: LoopCmd) -> Result<()> {
    match cmd {
        LoopCmd::Start(a) => {
            let pool = a.pool.as_deref().map(fs::read_to_string).transpose().context("reading pool")?;
            let label_mapping = a.label_mapping.as_deref().map(read_json).transpose()?;
            let request = LoopRequest {
                name: a.name,
                strategy: a.strategy,
                quota: a.quota,
                chunk_admit_limit: a.admit_limit,
                pool,
                label_mapping,
                base: a.base,
                max_tokens: a.max_tokens,
                per_target_quota: None,
            };
            let config = request.config()?;
            let o = orchestrator(store_dir, Arc::new(NoAuthor))?;
            let handle = o.start_loop(&request.name, config, request.base.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&handle)?);
        }
        LoopCmd::Generate { name, chunks, author_config } => {
            let author = HttpAuthor::new(&AuthorClientConfig::load(&author_config)?)?;
            let o = orchestrator(store_dir, Arc::new(author))?;
            for c in o.request_generation(&name, chunks)? {
                match &c.failure {
                    Some(f) => println!("{}\tfailed: {f}", c.id),
                    None => println!("{}\tparsed {}\tadmitted {}\tdiagnostics {}", c.id, c.parsed, c.admitted, c.diagnostics.len()),
                }
            }
        }
        LoopCmd::Close { name } => {
            let o = orchestrator(store_dir, Arc::new(NoAuthor))?;
            let (_, report) = o.close_loop(&name)?;
            print!("{}", report_json(&report));
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Corpus(cmd) => corpus(&cli.store, cmd)?,
        Command::Loop(cmd) => loop_cmd(&cli.store, cmd)?,
        Command::Metrics(MetricsCmd::Report { versions, unit, format }) => {
            let o = orchestrator(&cli.store, Arc::new(NoAuthor))?;
            match format {
                ReportFormat::Json => {
                    for v in &versions {
                        print!("{}", o.report_json(v)?);
                    }
                }
                ReportFormat::Table => {
                    let reports = versions.iter().map(|v| o.compute_report(v)).collect::<Result<Vec<_>, _>>()?;
                    print!("{}", render_table(&reports, unit.into()));
                }
            }
        }
        Command::Serve { addr, author_config } => {
            let author: Arc<dyn AuthorAdapter> = match author_config {
                Some(path) => Arc::new(HttpAuthor::new(&AuthorClientConfig::load(&path)?)?),
                None => Arc::new(NoAuthor),
            };
            // Built outside the runtime: the blocking HTTP client must not be
            // created or dropped on an async thread.
            let o = Arc::new(orchestrator(&cli.store, author)?);
            let app = api::router(o.clone());
            let rt = runtime()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("review API listening on {}", listener.local_addr()?);
                axum::serve(listener, app).await
            })?;
            drop(rt);
            drop(o);
        }
        Command::MockAuthor { addr, config } => {
            let config: MockAuthorConfig = match config {
                Some(p) => read_json(&p)?,
                None => MockAuthorConfig::default(),
            };
            let app = mock_server::router(Arc::new(MockAuthor::new(config)));
            runtime()?.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("mock author listening on {}", listener.local_addr()?);
                axum::serve(listener, app).await
            })?;
        }
        Command::Simulate { config, unit } => {
            let config: SimConfig = match config {
                Some(p) => read_json(&p)?,
                None => SimConfig::default(),
            };
            let store = Arc::new(CorpusStore::open(&cli.store)?);
            if !store.versions().is_empty() {
                bail!("simulate needs an empty store; {} already has versions", cli.store.display());
            }
            let reports = run_simulation(store, &config)?;
            print!("{}", render_table(&reports, unit.into()));
        }
    }
    Ok(())
}
