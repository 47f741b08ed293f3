//! Command-line front end: simulate scenes, segment event files, evaluate,
//! benchmark and run the method comparison and accuracy curve.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "motionseg", version, about = "Per-event motion segmentation of event-camera streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a preset scene to an event file and ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Segment an event file and write associations, motions and images.
    Segment(SegmentArgs),
    /// Score an associations CSV against ground truth.
    Eval(EvalArgs),
    /// Throughput table over cluster counts.
    Bench(BenchArgs),
    /// Layered, mixture and fuzzy methods from one initialization.
    Compare(CompareArgs),
    /// Accuracy against relative displacement on the two-pebble scene.
    Curve(CurveArgs),
}

/// Solver settings shared by the commands that segment. Flags override the
/// `--config` file, which overrides the defaults.
#[derive(Args, Clone, Default)]
struct SolverArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    j: Option<usize>,
    /// Motion model per cluster (flow2, rotation, fourdof), comma separated.
    #[arg(long)]
    model: Option<String>,
    /// layered, mixture or fuzzy.
    #[arg(long)]
    method: Option<String>,
    /// Events per window; without it the whole file is one packet.
    #[arg(long)]
    window: Option<usize>,
    /// Events between window starts (default half a window).
    #[arg(long)]
    stride: Option<usize>,
    /// Blur of the image of warped events, in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Trial step of the motion ascent, in pixels of displacement.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the solver kernels.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// two_pebbles or fan_and_coin.
    #[arg(long, default_value = "two_pebbles")]
    preset: String,
    /// Relative velocity of the second pebble, px/s.
    #[arg(long, default_value_t = 60.0)]
    dv: f64,
    /// Velocity of the first pebble, px/s.
    #[arg(long, default_value_t = 50.0)]
    base_v: f64,
    /// Relative displacement spanned by the two-pebble window, px.
    #[arg(long, default_value_t = 8.0)]
    displacement: f64,
    /// Fan angular velocity, rad/s.
    #[arg(long, default_value_t = 3.0)]
    omega: f64,
    /// Coin velocity, px/s.
    #[arg(long, default_value_t = 60.0)]
    v: f64,
    /// Scene duration in seconds; overrides the preset's window.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 96)]
    width: usize,
    #[arg(long, default_value_t = 72)]
    height: usize,
    /// Background noise events per pixel per second.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// key = value configuration file (simulator keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for events.txt and truth.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    /// Event file in `t x y p` format.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Sensor width, if the file has no geometry header.
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Associations CSV written by `segment`.
    #[arg(long)]
    assoc: PathBuf,
    /// Ground-truth sidecar written by `simulate`.
    #[arg(long)]
    truth: PathBuf,
    /// Also write the report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Cluster counts.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 20, 50])]
    j: Vec<usize>,
    /// Events in the random timing packet.
    #[arg(long, default_value_t = 20_000)]
    events: usize,
    #[arg(long, default_value_t = 96)]
    width: usize,
    #[arg(long, default_value_t = 72)]
    height: usize,
    /// Iterations per timed run.
    #[arg(long, default_value_t = 5)]
    max_iters: usize,
    /// Timed runs per cluster count (median reported).
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Event file; without it a two-pebble scene is simulated.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Ground truth for accuracies.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Relative velocity of the simulated scene, px/s.
    #[arg(long, default_value_t = 60.0)]
    dv: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CurveArgs {
    /// Relative velocities, px/s.
    #[arg(long, value_delimiter = ',', default_values_t = [30.0, 60.0, 120.0])]
    dv: Vec<f64>,
    /// Relative displacements, px.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 6.0, 8.0])]
    displacements: Vec<f64>,
    #[arg(long, default_value_t = 50.0)]
    base_v: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Segment(a) => commands::segment(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Compare(a) => commands::compare(a),
        Command::Curve(a) => commands::curve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
