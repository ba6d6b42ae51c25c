//! `ltca`: mask verification, inspection, reachability, benchmarks and inference.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ltca_core::mask::Geometry;

#[derive(Parser)]
#[command(
    name = "ltca",
    version,
    about = "Sparse long-range temporal attention toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every mask family against its predicate and the sparse kernel against the dense one.
    Verify(VerifyArgs),
    /// Summarise one mask on one geometry; optionally write its allow-list.
    Inspect(InspectArgs),
    /// Multi-layer reachability: JSON report and a frame-by-frame grid.
    Reach(ReachArgs),
    /// Sweep video length and emit `T,spec,pairs,macs,wall_ns` CSV.
    Bench(BenchArgs),
    /// Run the full pipeline on a fixture and write masks, scores and selection.
    Infer(InferArgs),
    /// Write a synthetic scene fixture with a matching pipeline file.
    Gen(GenArgs),
}

#[derive(Args)]
struct Common {
    /// Geometry as `T,N1,N2`.
    #[arg(long, default_value = "8,2,2")]
    geometry: Geometry,
    /// Mask spec JSON file.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Query width.
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Pipeline file whose attention stack is also checked.
    #[arg(long)]
    layers: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Largest accepted dense/sparse deviation.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flip one bit of the first allow-list before checking it.
    #[arg(long, hide = true)]
    inject_mutation: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Write the allow-list in fixture format.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReachArgs {
    #[command(flatten)]
    common: Common,
    /// Number of stacked layers; mask specs are cycled.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Also summarise diameters over this many seeds starting at `--seed`.
    #[arg(long, default_value_t = 0)]
    seeds: u64,
    /// Include the full per-layer matrices in the JSON report.
    #[arg(long)]
    matrices: bool,
    /// Directory for `reach.json` and `reach.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Video lengths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
    sweep: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    n1: usize,
    #[arg(long, default_value_t = 2)]
    n2: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Shift-window block size of the baseline.
    #[arg(long, default_value_t = 2)]
    ws: usize,
    /// Spec used for the `ltca` rows.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Write 0 for wall time so output is byte-reproducible.
    #[arg(long)]
    no_wall: bool,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Fixture directory with `pipeline.json` and `scene/`.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Pipeline file (overrides the fixture's).
    #[arg(long)]
    layers: Option<PathBuf>,
    /// Scene directory (overrides the fixture's).
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value = "single")]
    mode: String,
    #[arg(long, default_value_t = ltca_core::heads::DEFAULT_SIGMA)]
    sigma: f64,
    /// Reseed random mask families (layer `l` gets `seed + l`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Scene description JSON; the golden scene when absent.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Reach(a) => commands::reach(a),
        Command::Bench(a) => commands::bench(a),
        Command::Infer(a) => commands::infer(a),
        Command::Gen(a) => commands::gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ltca: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
