use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use synroute_service::api::router;
use synroute_service::app::AppState;
use synroute_service::cli::{load_config, run, Cli, Command};
use tracing_subscriber::EnvFilter;

fn serve(port: Option<u16>, config: &std::path::Path, static_dir: Option<std::path::PathBuf>) -> anyhow::Result<()> {
    let config = load_config(config)?;
    // Provider clients are blocking; build them before the runtime starts.
    let state = Arc::new(AppState::from_config(&config)?);
    let port = port.unwrap_or(config.server.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        tracing::info!(port, "listening");
        axum::serve(listener, router(state, static_dir)).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Serve {
            port,
            config,
            static_dir,
        } => serve(port, &config, static_dir),
        other => run(other, &mut std::io::stdout().lock()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
