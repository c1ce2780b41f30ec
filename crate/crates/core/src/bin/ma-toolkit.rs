use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ma_toolkit::bench::{run, ExperimentKind, ScenarioConfig};
use ma_toolkit::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "ma-toolkit",
    version,
    about = "Movable-antenna simulation and optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel magnitude map over the Tx region for a random path set.
    ChannelDemo(Common),
    /// One sparse channel estimate (joint or successive).
    Estimate(Common),
    /// One placement run; writes the convergence trace.
    Optimize(Common),
    /// Weighted sum-rate versus region size for several placement methods.
    WsrSweep(Common),
    /// Channel NMSE versus measurement count.
    NmseSweep(Common),
    /// Single-target CRB versus segment length.
    CrbSweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; a JSON sidecar is written next to it. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repetitions per sweep point (overrides the file).
    #[arg(long)]
    reps: Option<usize>,
    /// Suppress progress and summary messages.
    #[arg(long)]
    quiet: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<(), Error> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::defaults(kind),
    };
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config describes a `{}` experiment, not `{}`",
            cfg.kind.name(),
            kind.name()
        )));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.repetitions = r;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    if !args.quiet {
        eprintln!(
            "{}: seed {}, {} repetitions",
            kind.name(),
            cfg.seed,
            cfg.repetitions
        );
    }
    let out = run(&cfg)?;
    let meta = serde_json::to_string_pretty(&out.metadata).expect("metadata serializes");
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, &out.csv)?;
            std::fs::write(sidecar(path), meta + "\n")?;
            if !args.quiet {
                eprintln!("wrote {} and {}", path.display(), sidecar(path).display());
            }
        }
        None => {
            print!("{}", out.csv);
            if !args.quiet {
                eprintln!("{meta}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::ChannelDemo(a) => (ExperimentKind::ChannelDemo, a),
        Command::Estimate(a) => (ExperimentKind::Estimate, a),
        Command::Optimize(a) => (ExperimentKind::Optimize, a),
        Command::WsrSweep(a) => (ExperimentKind::WsrSweep, a),
        Command::NmseSweep(a) => (ExperimentKind::NmseSweep, a),
        Command::CrbSweep(a) => (ExperimentKind::CrbSweep, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
