use anyhow::{Context, Result};
use clap::Parser;
use mdi_core::gateway::{run_headless, serve, Demo, ServerConfig, DEFAULT_PORT};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Serve MDI demo views over WebSocket, or run the kinetics demo headless.
#[derive(Debug, Parser)]
#[command(name = "mdi", version)]
struct Cli {
    /// TCP port to listen on (0 picks a free port).
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Demo scene to load.
    #[arg(long, value_enum, default_value_t = Demo::Kinetics)]
    demo: Demo,
    /// Run without a server and export the entropy series.
    #[arg(long)]
    headless: bool,
    /// Number of simulation steps (required with --headless).
    #[arg(long)]
    steps: Option<u64>,
    /// RNG seed for particle initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination for --headless; stdout when omitted.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Minimum interval between view refreshes in milliseconds.
    #[arg(long, default_value_t = 33)]
    refresh_ms: u64,
    /// Coarse-graining cells per axis for the entropy estimate.
    #[arg(long, default_value_t = 10)]
    grid_m: usize,
    /// Particle count for the kinetics demo.
    #[arg(long, default_value_t = 50_000)]
    particles: usize,
}

impl From<Cli> for ServerConfig {
    fn from(c: Cli) -> Self {
        ServerConfig {
            host: c.host,
            port: c.port,
            demo: c.demo,
            headless: c.headless,
            steps: c.steps,
            seed: c.seed,
            export_path: c.export,
            refresh_ms: c.refresh_ms,
            grid_m: c.grid_m,
            particles: c.particles,
        }
    }
}

fn run(config: ServerConfig) -> Result<()> {
    if config.headless {
        let report = run_headless(&config)?;
        log::info!(
            "{} steps, {} samples, final state {}",
            report.steps,
            report.samples.len(),
            report.final_state
        );
        if config.export_path.is_none() {
            std::io::stdout().write_all(&report.csv).context("writing CSV to stdout")?;
        }
        Ok(())
    } else {
        serve(&config)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().into()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdi: {e:#}");
            ExitCode::FAILURE
        }
    }
}
