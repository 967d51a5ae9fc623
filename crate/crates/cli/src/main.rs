//! `aimguard`: simulate, extract, train, predict, explain, eval, render and
//! serve from one binary.
//!
//! Every subcommand accepts `--config file.json`; its keys override the
//! matching flags. Exit status is 0 on success, 1 on a runtime failure and 2
//! on a usage error.

mod commands;
mod config;
mod data;
mod manifest;
mod render;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::{EvalArgs, ExplainArgs, ExtractArgs, PredictArgs, SimulateArgs, TrainArgs};
use render::RenderArgs;

#[derive(Parser, Debug)]
#[command(name = "aimguard", version, about = "Aim-assist cheat detection with per-tick explanations")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "AIMGUARD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Simulate(SimulateArgs),
    /// Cut elimination windows and compute their features.
    Extract(ExtractArgs),
    /// Fit detector, aggregator, threshold and match classifier.
    Train(TrainArgs),
    /// Score every player of every match in a tick log.
    Predict(PredictArgs),
    /// Per-tick attributions for the eliminations of one match.
    Explain(ExplainArgs),
    /// Metrics of a verdict file against labels.
    Eval(EvalArgs),
    /// Draw an explanation's trajectory as SVG.
    Render(RenderArgs),
    /// Run the review service.
    Serve(ServeArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct ServeArgs {
    #[arg(long, default_value = "aimguard-data")]
    data_dir: PathBuf,
    /// Verdict JSONL from `predict`; its players become cases.
    #[arg(long)]
    verdicts: Option<PathBuf>,
    /// Directory of explanation documents from `explain`.
    #[arg(long)]
    explanations: Option<PathBuf>,
    /// Dashboard bundle served at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Shared secret required on verdict posts.
    #[arg(long, env = "AIMGUARD_TOKEN", hide_env_values = true)]
    #[serde(skip_serializing)]
    token: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn serve(args: ServeArgs, threads: Option<usize>) -> Result<()> {
    let mut run = manifest::Run::start("serve", &args)?;
    let service = aimguard_service::ServiceConfig {
        data_dir: args.data_dir.clone(),
        verdicts: args.verdicts.clone(),
        explanations: args.explanations.clone(),
        static_dir: args.static_dir.clone(),
        token: args.token.clone(),
    };
    if let Some(v) = &args.verdicts {
        run.input(v);
    }
    let app = aimguard_service::build_app(&service).context("serve: opening case store")?;
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        rt.worker_threads(n.max(1));
    }
    let rt = rt.enable_all().build().context("serve: starting runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .with_context(|| format!("serve: binding {}", args.addr))?;
        let local = listener.local_addr()?;
        println!("listening on http://{local}");
        use std::io::Write;
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        aimguard_service::serve(listener, app, shutdown).await.context("serve")
    })?;
    run.finish(&args.data_dir.join("serve.manifest.json"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    macro_rules! with_config {
        ($args:expr) => {{
            let path = $args.config.clone();
            config::apply($args, path.as_deref())?
        }};
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(with_config!(a)),
        Command::Extract(a) => commands::extract(with_config!(a)),
        Command::Train(a) => commands::train(with_config!(a)),
        Command::Predict(a) => commands::predict(with_config!(a)),
        Command::Explain(a) => commands::explain(with_config!(a)),
        Command::Eval(a) => commands::eval(with_config!(a)),
        Command::Render(a) => render::render(with_config!(a)),
        Command::Serve(a) => {
            let token = a.token.clone();
            let mut a = with_config!(a);
            a.token = a.token.or(token);
            serve(a, cli.threads)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
