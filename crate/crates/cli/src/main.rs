use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lewisrows::io::MatrixFormat;
use lewisrows::sampler::DeltaMode;
use lewisrows::LewisError;

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(name = "lewisrows", version, about = "Lp Lewis weights and row-sampling sketches")]
struct Cli {
    /// Write a JSON run manifest to this path.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact leverage scores, one per line.
    Leverage(LeverageArgs),
    /// Lp Lewis weights.
    Lewis(LewisArgs),
    /// Draw a row-sampling sketch from Lewis weights.
    Sample(SampleArgs),
    /// Estimate the distortion of a sketched matrix.
    Verify(VerifyArgs),
    /// Approximate the Lewis quadratic form by recursive halving.
    Recurse(RecurseArgs),
    /// Compare Lewis, uniform and leverage-score sampling on synthetic matrices.
    Bench(BenchArgs),
    /// Write a synthetic matrix.
    #[command(hide = true)]
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Mtx,
    Csv,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Mtx => MatrixFormat::MatrixMarket,
            FormatArg::Csv => MatrixFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Iterative,
    Convex,
    /// Iterative for p < 4, convex otherwise.
    Auto,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    High,
    Constant,
}

impl From<ModeArg> for DeltaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::High => DeltaMode::HighProbability,
            ModeArg::Constant => DeltaMode::Constant,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Matrix file (.mtx is Matrix Market, anything else headerless CSV).
    #[arg(short, long, value_name = "PATH")]
    input: PathBuf,
    /// Override format detection.
    #[arg(long)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug)]
struct LeverageArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Defaults to stdout.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LewisArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short, long)]
    p: f64,
    #[arg(long, value_enum, default_value = "auto")]
    method: Method,
    /// Accuracy target of the iterative solver.
    #[arg(long, default_value_t = 1e-8)]
    theta: f64,
    /// Certificate tolerance of the convex solver.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Leverage-score accuracy of each iterative step; 1 is exact.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Lewis weights file; computed with the auto solver when absent.
    #[arg(short, long, value_name = "PATH")]
    weights: Option<PathBuf>,
    #[arg(short, long)]
    p: f64,
    #[arg(short, long)]
    epsilon: f64,
    /// Oversampling constant C_s.
    #[arg(long = "oversample", default_value_t = 4.0)]
    oversample: f64,
    #[arg(long, value_enum, default_value = "high")]
    mode: ModeArg,
    /// Use the fixed-point row count (p = 1, high-probability mode only).
    #[arg(long)]
    refine: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sketch operator output (`index scale` lines).
    #[arg(long, value_name = "PATH")]
    sketch: Option<PathBuf>,
    /// Sketched matrix output.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Sketched matrix with the same number of columns.
    #[arg(long, value_name = "PATH")]
    sketch_matrix: PathBuf,
    #[arg(short, long)]
    p: f64,
    #[arg(long, default_value_t = 2000)]
    num_dirs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report whether the distortion is within this epsilon.
    #[arg(short, long)]
    epsilon: Option<f64>,
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecurseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short, long)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Oversampling constant f(p); defaults to 1 for p <= 2 and 4 above.
    #[arg(long)]
    f_p: Option<f64>,
    /// Solve inputs with at most this many rows directly (default: d).
    #[arg(long)]
    base_rows: Option<usize>,
    /// Drop the d^{p/2} factor from the keep probabilities.
    #[arg(long)]
    no_dimension_factor: bool,
    /// Gaussian probes per level.
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// The d x d form, as Matrix Market. Defaults to stdout.
    #[arg(long, value_name = "PATH")]
    output_form: Option<PathBuf>,
    /// Per-level `level input_rows sampled_rows` lines.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Weights estimated from the form by Gaussian probes.
    #[arg(long, value_name = "PATH")]
    weights_output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Workload, e.g. `spiky:4000x10`, `gaussian:2000x8`, `identity:5`. Repeatable.
    #[arg(short, long = "generator", default_value = "spiky:4000x10")]
    generators: Vec<String>,
    #[arg(short, long, value_delimiter = ',', default_value = "1")]
    p: Vec<f64>,
    #[arg(short, long, value_delimiter = ',', default_value = "0.25")]
    epsilon: Vec<f64>,
    /// Number of trials; trial seeds are `seed .. seed + seeds`.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the generated matrices.
    #[arg(long, default_value_t = 0)]
    matrix_seed: u64,
    #[arg(long = "oversample", default_value_t = 4.0)]
    oversample: f64,
    #[arg(long, value_enum, default_value = "constant")]
    mode: ModeArg,
    #[arg(long, default_value_t = 2000)]
    num_dirs: usize,
    /// CSV output. Defaults to stdout.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(short, long)]
    generator: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
    #[arg(long)]
    format: Option<FormatArg>,
}

fn exit_code(err: &LewisError) -> u8 {
    match err {
        LewisError::Io(_) => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), LewisError> {
    let Ok(raw) = std::env::var("LEWISROWS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| LewisError::InvalidInput(format!("LEWISROWS_THREADS = '{raw}' is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LewisError::InvalidInput(format!("cannot size thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lewisrows: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
