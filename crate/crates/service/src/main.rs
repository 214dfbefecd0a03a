use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use ganimals::{Platform, ServiceConfig};
use tracing_subscriber::filter::LevelFilter;

#[derive(Parser)]
#[command(
    name = "ganimals",
    version,
    about = "Breed, feed and catalogue ganimals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Drive synthetic users through an in-memory platform.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a metric across a predicate over the stored annotations.
    Stats {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "cute")]
        metric: String,
        #[arg(long, default_value = "contains_dog")]
        predicate: String,
    },
}

fn init_logging() {
    let level = std::env::var("GANIMALS_LOG")
        .ok()
        .and_then(|v| v.parse::<LevelFilter>().ok())
        .unwrap_or(LevelFilter::INFO);
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Serve { config } => {
            let config = ServiceConfig::load(config.as_deref())?;
            let bind = config.bind.clone();
            // Built before the runtime: the worker client blocks.
            let platform = Arc::new(Platform::open(config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                tracing::info!(addr = %listener.local_addr()?, "listening");
                ganimals::http::serve(platform, listener).await
            })?;
        }
        Command::Simulate {
            config,
            users,
            steps,
            seed,
            out,
        } => {
            let config = ServiceConfig::load(config.as_deref())?;
            let run = ganimals::simulate::run(&config, users, steps, seed)?;
            let json = run.report.to_json();
            match out {
                Some(path) => {
                    std::fs::write(&path, json)?;
                    tracing::info!(path = %path.display(), hash = %run.report.state_hash, "report written");
                }
                None => print!("{json}"),
            }
        }
        Command::Stats {
            config,
            metric,
            predicate,
        } => {
            let config = ServiceConfig::load(config.as_deref())?;
            let platform = Platform::open(config)?;
            let comparison = platform.stats(&metric, &predicate)?;
            println!("{}", serde_json::to_string_pretty(&comparison)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
