//! Command-line front end: run scenarios, validate them, and project traces
//! for conformance checks.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use frugal5g::ids::NodeId;
use frugal5g::sim::{self, load_scenario, Trace, TraceKind};

#[derive(Parser)]
#[command(
    name = "frugal5g",
    version,
    about = "Frugal 5G access-network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace/metrics.
    Run {
        scenario: PathBuf,
        /// Override the seed from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trace here (stdout summary otherwise).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the metrics here.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Parse and validate a scenario file.
    Validate { scenario: PathBuf },
    /// Project a trace file by node and/or kind.
    TraceFilter {
        trace: PathBuf,
        /// Comma-separated node ids to keep.
        #[arg(long)]
        node: Option<String>,
        /// Comma-separated kinds to keep (rrc, mgmt, data, mrb, ctrl, auth,
        /// sync, drop, boundary).
        #[arg(long)]
        kind: Option<String>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            trace,
            metrics,
        } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| format!("{}: {e}", scenario.display()))?;
            let parsed = load_scenario(&text).map_err(|e| e.to_string())?;
            let (trace_out, metrics_out) = sim::run(&parsed, seed);
            match trace {
                Some(path) => std::fs::write(&path, trace_out.to_text())
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                None => println!("{} trace records", trace_out.records.len()),
            }
            match metrics {
                Some(path) => std::fs::write(&path, metrics_out.to_text())
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                None => print!("{}", metrics_out.to_text()),
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| format!("{}: {e}", scenario.display()))?;
            let parsed = load_scenario(&text).map_err(|e| e.to_string())?;
            println!(
                "ok: {} ({} nodes, {} flows)",
                parsed.name,
                parsed.nodes.len(),
                parsed.flows.len()
            );
            Ok(())
        }
        Command::TraceFilter { trace, node, kind } => {
            let text =
                std::fs::read_to_string(&trace).map_err(|e| format!("{}: {e}", trace.display()))?;
            let parsed = Trace::parse(&text).map_err(|e| e.to_string())?;
            let nodes: BTreeSet<NodeId> = node
                .map(|s| s.split(',').map(NodeId::from).collect())
                .unwrap_or_default();
            let kinds: BTreeSet<TraceKind> = match kind {
                Some(s) => s
                    .split(',')
                    .map(|k| TraceKind::parse(k).ok_or_else(|| format!("unknown kind `{k}`")))
                    .collect::<Result<_, _>>()?,
                None => BTreeSet::new(),
            };
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for record in parsed.filter(&nodes, &kinds) {
                match writeln!(out, "{}", record.line()) {
                    Ok(()) => {}
                    // the projection is routinely piped into head/diff
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
                    Err(e) => return Err(e.to_string()),
                }
            }
            Ok(())
        }
    }
}
