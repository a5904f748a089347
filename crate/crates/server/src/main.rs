use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use streammap_core::ingest::SourceConfig;
use streammap_core::pipeline;
use streammap_server::config::ConfigArgs;
use streammap_server::{ServeOptions, Server, DEFAULT_MAX_QUERIES};

/// Stable topic maps for live text streams.
#[derive(Debug, Parser)]
#[command(name = "streammap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the live server.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// `http`, `stdin` or `replay:<path>`.
        #[arg(long, default_value = "http")]
        source: String,
        /// Pace a replay source at this multiple of real time.
        #[arg(long)]
        replay_speed: Option<f64>,
        /// Maximum number of distinct query pipelines.
        #[arg(long, default_value_t = DEFAULT_MAX_QUERIES)]
        max_queries: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Replay an NDJSON file unpaced, writing frames and metrics.csv.
    Replay {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long = "out", value_name = "DIR")]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Replay an NDJSON file in memory and print the metrics CSV.
    Bench {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { listen, source, replay_speed, max_queries, config } => {
            let opts = ServeOptions {
                listen,
                source: SourceConfig::parse(&source, replay_speed)?,
                config: config.resolve()?,
                max_queries,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let server = Server::bind(opts).await?;
                log::info!("listening on http://{}", server.local_addr()?);
                server
                    .run(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })
        }
        Command::Replay { input, output, config } => {
            let run = pipeline::run_replay(&input, &config.resolve()?, &output)
                .with_context(|| format!("replay of {} failed", input.display()))?;
            log::info!(
                "{} frames written to {} ({} failed ticks, {} malformed lines, {} duplicates)",
                run.frames,
                output.display(),
                run.failed_ticks,
                run.malformed,
                run.duplicates
            );
            Ok(())
        }
        Command::Bench { input, config } => {
            let run = pipeline::bench(&input, &config.resolve()?)
                .with_context(|| format!("bench of {} failed", input.display()))?;
            let mut out = std::io::stdout().lock();
            out.write_all(run.metrics_csv().as_bytes())?;
            out.flush()?;
            if !run.reports.is_empty() {
                let mut totals: Vec<f64> =
                    run.reports.iter().map(|r| r.durations.total().as_secs_f64() * 1000.0).collect();
                totals.sort_by(f64::total_cmp);
                log::info!(
                    "{} ticks, median {:.2} ms, max {:.2} ms",
                    totals.len(),
                    totals[totals.len() / 2],
                    totals[totals.len() - 1]
                );
            }
            Ok(())
        }
    }
}
