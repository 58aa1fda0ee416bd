use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use vocab_admin::{parse_script, parse_seed, seed, simulate_study, AdminError};
use vocab_core::clock::SystemClock;
use vocab_core::export::{export_event_log, export_vocabulary, import_event_log};
use vocab_core::refinement::{BackendRegistry, MockBackend};
use vocab_core::service::audit;
use vocab_core::store::{SqliteStore, Storage, StoreConfig, LATEST_SCHEMA_VERSION};
use vocab_core::{ServiceConfig, VocabService};

#[derive(Parser)]
#[command(name = "vocab-admin", about = "Operate a vocabulary service database")]
struct Cli {
    /// Database URL (`sqlite://path`, a bare path, or `sqlite::memory:`).
    /// Defaults to `$VOCAB_DATABASE_URL`, then `sqlite://vocab.db`;
    /// simulate-study defaults to an in-memory database.
    #[arg(long, global = true)]
    database: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    EventLog,
    Vocabulary,
}

#[derive(Subcommand)]
enum Command {
    /// Create or upgrade the schema.
    Migrate {
        #[arg(long, default_value_t = LATEST_SCHEMA_VERSION)]
        target: i64,
    },
    /// Load starter terms from a TOML seed file.
    Seed { file: PathBuf },
    Export {
        #[arg(long, value_enum)]
        format: Format,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load an exported event log into an empty database.
    ImportEvents { file: PathBuf },
    /// Compare stored terms with a replay of their events.
    Audit,
    /// Run a study script through the API against the mock backend.
    SimulateStudy {
        script: PathBuf,
        /// Also write the resulting event log here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, AdminError> {
    std::fs::read_to_string(path).map_err(|source| AdminError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: Option<&Path>, text: &str) -> Result<(), AdminError> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|source| AdminError::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn open(url: &str) -> Result<SqliteStore, AdminError> {
    Ok(SqliteStore::open(&StoreConfig {
        url: url.to_owned(),
        pool_size: 1,
    })?)
}

fn run(cli: Cli) -> Result<ExitCode, AdminError> {
    let database = cli
        .database
        .clone()
        .or_else(|| std::env::var("VOCAB_DATABASE_URL").ok());
    let database = || database.clone().unwrap_or_else(|| "sqlite://vocab.db".into());
    match cli.command {
        Command::Migrate { target } => {
            let store = open(&database())?;
            let version = store.migrate(target)?;
            println!("schema version {version}");
        }
        Command::Seed { file } => {
            let records = parse_seed(&read(&file)?)?;
            let store: Arc<dyn Storage> = Arc::new(open(&database())?);
            let service = VocabService::new(
                store,
                Arc::new(SystemClock),
                BackendRegistry::new(Arc::new(MockBackend::new())),
                ServiceConfig::default(),
            );
            println!("seeded {} terms", seed(&service, &records)?);
        }
        Command::Export { format, out } => {
            let store = open(&database())?;
            let text = match format {
                Format::EventLog => export_event_log(&store)?,
                Format::Vocabulary => export_vocabulary(&store)?,
            };
            write(out.as_deref(), &text)?;
        }
        Command::ImportEvents { file } => {
            let store = open(&database())?;
            let summary = import_event_log(&store, &read(&file)?)?;
            println!("imported {} events for {} terms", summary.events, summary.terms);
        }
        Command::Audit => {
            let report = audit(&open(&database())?)?;
            for mismatch in &report.mismatches {
                println!("{}: {}", mismatch.term_id, mismatch.detail);
            }
            println!("{} terms checked, {} mismatches", report.terms_checked, report.mismatches.len());
            if !report.is_clean() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::SimulateStudy { script, events } => {
            let script = parse_script(&read(&script)?)?;
            let url = cli.database.unwrap_or_else(|| "sqlite::memory:".into());
            let store = SqliteStore::open_migrated(&StoreConfig { url, pool_size: 1 })?;
            let run = simulate_study(&script, Arc::new(store))?;
            if let Some(path) = events {
                write(Some(&path), &run.event_log)?;
            }
            println!("{}", serde_json::to_string_pretty(&run.summary).expect("summary serializes"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("vocab-admin: {e}");
            ExitCode::from(2)
        }
    }
}
