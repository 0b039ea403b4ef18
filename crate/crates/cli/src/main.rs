//! `kg-lab`: reproducible experiments on `|q . x| < psi(|q|)` in the unit cube.
//!
//! Exit status is 0 on success, 2 for invalid arguments (including inputs
//! a library routine rejects) and 1 when a result fails its own guarantee
//! or output cannot be written.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use kg_core::{KgError, TruncationWindow};

use crate::output::Format;

#[derive(Parser, Debug)]
#[command(
    name = "kg-lab",
    version,
    about = "Zero-one law experiments for small linear forms |q . x| < psi(|q|)",
    after_help = "Every subcommand also accepts --json-config <FILE>: a JSON object whose keys are flag names."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convergence of sum k^(n-2) psi(k), slow decrease, predicted measure.
    #[command(args_override_self = true)]
    Classify(ClassifyArgs),
    /// Shell sizes, or the canonical vectors of a shell.
    #[command(args_override_self = true)]
    Shells(ShellsArgs),
    /// Exact volume of a slab |q . x| < delta in the unit cube.
    #[command(args_override_self = true)]
    Slab(SlabArgs),
    /// Number of q with |q| <= Q and |q . x| < psi(|q|).
    #[command(args_override_self = true)]
    Count(CountArgs),
    /// Monte-Carlo measure of the union of slabs over N <= |q| <= Q.
    #[command(args_override_self = true)]
    Measure(MeasureArgs),
    /// Lift a witness for ||q_hat . x_hat|| on a face to one for |q . x|.
    #[command(args_override_self = true)]
    Lift(LiftArgs),
    /// Measure along a window schedule and compare with the predicted branch.
    #[command(args_override_self = true)]
    Theorem(TheoremArgs),
    /// Dickinson's dimension for psi(k) = k^-tau and m forms in n variables.
    #[command(args_override_self = true)]
    Dim(DimArgs),
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report wall-clock seconds in elapsed_s; without it elapsed_s is 0 and
    /// repeated runs are byte-identical.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug, Clone)]
struct SamplingArgs {
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker cap; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..1024))]
    threads: Option<u64>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    n: u32,
    /// pow:c=<c>,tau=<tau> | logpow:c=<c>,s=<s>,p=<p> | table:<path>
    #[arg(long)]
    psi: String,
    /// Contraction factor for the slow-decrease scan [default: 1/n].
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    k_max: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ShellsArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
    /// Heights, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u64>,
    /// One row per canonical vector instead of one per shell.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SlabArgs {
    /// Integer vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    q: Vec<i64>,
    #[arg(long)]
    delta: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct CountArgs {
    /// Dimension; taken from --x when that is given.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    n: Option<u32>,
    #[arg(long)]
    psi: String,
    /// Values of Q, comma separated and increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    heights: Vec<u64>,
    /// A single point; otherwise --points seeded uniform points are used.
    #[arg(long, value_delimiter = ',', conflicts_with = "points")]
    x: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    n: u32,
    #[arg(long)]
    psi: String,
    /// N,Q
    #[arg(long, value_parser = parse_window)]
    window: TruncationWindow,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct LiftArgs {
    #[arg(long)]
    psi: String,
    /// Face point, n-1 coordinates in [0,1].
    #[arg(long, value_delimiter = ',', required = true)]
    x_hat: Vec<f64>,
    /// Face witness, n-1 integers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    q_hat: Vec<i64>,
    /// Slow-decrease constant C [default: from a scan at c = 1/n].
    #[arg(long)]
    c: Option<f64>,
    /// Face x_j = 1 holding the point, 1-based [default: n].
    #[arg(long)]
    face: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct TheoremArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    n: u32,
    #[arg(long)]
    psi: String,
    /// N,Q;N,Q;... increasing componentwise.
    #[arg(long, value_parser = parse_windows)]
    windows: WindowList,
    /// Value the last estimate of a full-measure run must reach.
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct DimArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    m: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
    #[arg(long)]
    tau: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone)]
struct WindowList(Vec<TruncationWindow>);

fn parse_window(s: &str) -> Result<TruncationWindow, String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("window must be N,Q, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad window bound {t:?}: {e}"));
    TruncationWindow::new(parse(lo)?, parse(hi)?).map_err(|e| e.to_string())
}

fn parse_windows(s: &str) -> Result<WindowList, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_window).collect::<Result<_, _>>().map(WindowList)
}

/// Why a command did not produce output.
#[derive(Debug)]
pub enum Failure {
    /// Rejected by the argument parser, which formats its own message.
    Parse(clap::Error),
    Usage(String),
    Internal(String),
}

impl From<KgError> for Failure {
    fn from(e: KgError) -> Self {
        match e {
            KgError::Internal(_) => Failure::Internal(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(format!("cannot write output: {e}"))
    }
}

fn accepts_flag(sub: &str, long: &str) -> bool {
    Cli::command()
        .find_subcommand(sub)
        .is_some_and(|c| c.get_arguments().any(|a| a.get_long() == Some(long)))
}

fn run(args: Vec<String>) -> Result<(), Failure> {
    let args = config::expand(args, accepts_flag).map_err(Failure::Usage)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(Failure::Parse(e)),
    };
    let report = match cli.command {
        Command::Classify(a) => commands::classify(a)?,
        Command::Shells(a) => commands::shells(a)?,
        Command::Slab(a) => commands::slab(a)?,
        Command::Count(a) => commands::count(a)?,
        Command::Measure(a) => commands::measure(a)?,
        Command::Lift(a) => commands::lift(a)?,
        Command::Theorem(a) => commands::theorem(a)?,
        Command::Dim(a) => commands::dim(a)?,
    };
    report.emit()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(e)) => {
            let _ = e.print();
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor usage, run 'kg-lab --help' or 'kg-lab <SUBCOMMAND> --help'.");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
