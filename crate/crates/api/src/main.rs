use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use tracing_subscriber::EnvFilter;
use vocab_api::{backend_from_config, build_state, router, Config};
use vocab_core::clock::SystemClock;
use vocab_core::store::{SqliteStore, StoreConfig};

#[derive(Parser)]
#[command(name = "vocab-server", about = "Serve the vocabulary API")]
struct Args {
    /// TOML config file; `VOCAB_*` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

async fn serve(config: Config) -> Result<(), Box<dyn std::error::Error>> {
    let store = SqliteStore::open_migrated(&StoreConfig {
        url: config.database.url.clone(),
        pool_size: config.database.pool_size,
    })?;
    let backend = backend_from_config(&config)?;
    let state = build_state(&config, Arc::new(store), Arc::new(SystemClock), backend)?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let config = match Config::load(args.config.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("vocab-server: {e}");
            return ExitCode::from(2);
        }
    };
    match serve(config).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vocab-server: {e}");
            ExitCode::FAILURE
        }
    }
}
