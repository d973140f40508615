use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mrdaw_core::wav::export_session;
use mrdaw_core::SessionConfig;
use mrdaw_sim::{load_trace, run, LatencyModel, SimConfig};

#[derive(Parser)]
#[command(name = "mrdaw-sim", version, about = "Replay loop-session traces under simulated network latency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay one trace and check every invariant.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON Lines trace, one event per line.
    #[arg(long)]
    trace: PathBuf,
    /// Named one-way delay: local, metro, continental or 1000km-fiber.
    #[arg(long, conflicts_with = "one_way")]
    latency: Option<String>,
    /// Mean one-way delay in milliseconds.
    #[arg(long = "one-way")]
    one_way: Option<f64>,
    /// Uniform jitter half-width in milliseconds.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Datagram loss in percent.
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write one loop period per user as WAV files into this directory.
    #[arg(long = "emit-wav")]
    emit_wav: Option<PathBuf>,
    /// Write the full JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long = "tracks-per-user", default_value_t = 4)]
    tracks_per_user: usize,
    #[arg(long = "sample-rate", default_value_t = 48_000)]
    sample_rate: u32,
    /// Copies sent of every datagram.
    #[arg(long, default_value_t = 8)]
    redundancy: u32,
}

fn run_command(args: RunArgs) -> Result<bool> {
    let trace = load_trace(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
    let base = match (&args.latency, args.one_way) {
        (Some(name), None) => LatencyModel::preset(name)?,
        (None, Some(ms)) => LatencyModel { one_way_ms: ms, ..LatencyModel::local() },
        (None, None) => LatencyModel::local(),
        (Some(_), Some(_)) => bail!("--latency and --one-way are mutually exclusive"),
    };
    let model = LatencyModel::new(base.one_way_ms, args.jitter, args.loss, args.seed)?;
    let config = SimConfig {
        session: SessionConfig::new(args.users, args.tracks_per_user).with_sample_rate(args.sample_rate),
        redundancy: args.redundancy,
        ..SimConfig::default()
    };
    let outcome = run(&trace, &model, &config)?;
    let report = &outcome.report;

    let view = &report.final_snapshot.view;
    println!("events      {}", report.events);
    println!("transport   {:?}", view.transport);
    println!("looplen     {}", view.looplen);
    let tracks: Vec<_> = view.tracks.iter().map(|t| t.state.as_str()).collect();
    println!("tracks      {}", tracks.join(" "));
    for client in &report.clients {
        match client.convergence_ms {
            Some(ms) => println!("{}          converged {ms:.3} ms after last event (bound {:.3} ms)", client.user, report.bound_ms),
            None => println!("{}          did not converge", client.user),
        }
    }
    println!("state_hash  {}", report.state_hash);
    println!("audio_hash  {}", report.audio_hash);

    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &args.emit_wav {
        let files = export_session(outcome.host.state(), outcome.host.loops(), dir, "sim")
            .with_context(|| format!("exporting WAV files to {}", dir.display()))?;
        for f in files {
            println!("wrote       {}", f.display());
        }
    }
    for v in &report.violations {
        println!("VIOLATION   {}: {}", v.name, v.detail);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_command(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
