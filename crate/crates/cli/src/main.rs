//! `curvestream` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or invalid input data, 2 bad configuration
//! or missing inputs, 3 replay divergence.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use curvestream::evaluator::{
    list_stream_files, load_labeled, run_sweep, write_labeled, NamedStream, RunManifest, SweepGrid,
    DEFAULT_WINDOW,
};
use curvestream::feature_io::{read_stream, StreamFormat};
use curvestream::hvmm::Engine;
use curvestream::simulator::{generate, place_transitions, SyntheticSpec};
use curvestream::strategies::SelectorKind;
use curvestream::trace::{compare_traces, ReplayVerdict};
use curvestream::{Error, FrameFeature, RunConfig};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGE: u8 = 3;

#[derive(Parser)]
#[command(name = "curvestream", version, about = "Curvature-aware streaming frame memory")]
struct Cli {
    /// Print the built-in default configuration and exit.
    #[arg(long)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine over a feature stream and write a JSONL step trace.
    Score(ScoreArgs),
    /// Generate a synthetic labeled stream.
    Simulate(SimulateArgs),
    /// Sweep strategies and parameters over a directory of labeled streams.
    Eval(EvalArgs),
    /// Recompute a trace and compare it byte for byte.
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    transition_size: Option<u32>,
    #[arg(long)]
    high_res_side: Option<u32>,
    #[arg(long)]
    cost_high: Option<f64>,
    #[arg(long)]
    cost_low: Option<f64>,
    /// Comma-separated frame ids that carry a query.
    #[arg(long, value_delimiter = ',')]
    query_frames: Option<Vec<u64>>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.merge_file(path).map_err(|e| match e {
                Error::Io(io) => CliError::config(format!("{}: {io}", path.display())),
                other => other.into(),
            })?;
        }
        if let Some(v) = self.capacity {
            cfg.capacity = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.k1 {
            cfg.k1 = v;
        }
        if let Some(v) = self.k2 {
            cfg.k2 = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.transition_size {
            cfg.transition_size = v;
        }
        if self.high_res_side.is_some() {
            cfg.high_res_side = self.high_res_side;
        }
        if let Some(v) = self.cost_high {
            cfg.cost_high = v;
        }
        if self.cost_low.is_some() {
            cfg.cost_low = self.cost_low;
        }
        if let Some(q) = &self.query_frames {
            cfg.query_frames = q.iter().copied().collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Input stream (`.cvst` binary or `.jsonl`).
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<StreamFormat>,
    /// Trace output path; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output stream path; `.jsonl` selects JSONL, anything else binary.
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value_t = 500)]
    frames: usize,
    /// Number of transitions to place at seeded random positions.
    #[arg(long, default_value_t = 0)]
    transitions: usize,
    /// Explicit transition indices; overrides --transitions.
    #[arg(long, value_delimiter = ',')]
    transition_at: Option<Vec<usize>>,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Geodesic step per frame, radians.
    #[arg(long, default_value_t = 0.02)]
    drift_step: f64,
    /// Direction change at transitions, radians.
    #[arg(long, default_value_t = PI / 3.0)]
    turn_angle: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames per second used for timestamps.
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of labeled streams (`*.cvst`/`*.jsonl` plus `*.truth.json`).
    #[arg(long)]
    streams: Option<PathBuf>,
    /// Rerun exactly the streams and grid recorded in a manifest.
    #[arg(long, conflicts_with = "streams")]
    manifest: Option<PathBuf>,
    /// CSV report path; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Directory for per-cell traces and the run manifest.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Comma-separated strategies: uniform, cosine, curvature, curvestream.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<SelectorKind>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    k1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    k2: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    capacity: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    budget: Option<Vec<usize>>,
    /// Match window in frames.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: u64,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trace produced by `score`.
    #[arg(long)]
    trace: PathBuf,
    /// The stream the trace was computed from.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    format: Option<StreamFormat>,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Argument(_) | Error::Sequencing(_) => EXIT_CONFIG,
            _ => EXIT_IO,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::config(format!("input not found: {}", path.display())));
    }
    Ok(())
}

fn load_frames(path: &Path, format: Option<StreamFormat>) -> Result<Vec<FrameFeature>, CliError> {
    require_file(path)?;
    let format = format.unwrap_or_else(|| StreamFormat::from_path(path));
    let file = io::BufReader::new(fs::File::open(path)?);
    let frames = read_stream(file, format)?.collect::<Result<Vec<_>, _>>()?;
    Ok(frames)
}

/// Runs the engine and renders the trace as JSONL text.
fn render_trace(cfg: &RunConfig, frames: &[FrameFeature]) -> Result<(String, Engine), CliError> {
    let mut engine = Engine::new(cfg.engine_config()?)?;
    let mut out = String::new();
    for f in frames {
        let step = engine.step(f, cfg.query_frames.contains(&f.frame_id))?;
        out.push_str(&step.to_json());
        out.push('\n');
    }
    Ok((out, engine))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let cfg = args.config.resolve()?;
    if args.config.print_config {
        print!("{cfg}");
        return Ok(());
    }
    let input = args
        .input
        .ok_or_else(|| CliError::config("--input is required"))?;
    let frames = load_frames(&input, args.format)?;
    let (trace, engine) = render_trace(&cfg, &frames)?;
    write_output(args.output.as_deref(), trace.as_bytes())?;
    let c = engine.counts();
    eprintln!(
        "frames={} clear={} blurred={} discard={} warmup={} queue={} tokens_total={}",
        frames.len(),
        c.clear,
        c.blurred,
        c.discard,
        c.warmup,
        engine.queue().len(),
        engine.tokens_total()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if !(args.fps.is_finite() && args.fps > 0.0) {
        return Err(CliError::config(format!("fps must be positive, got {}", args.fps)));
    }
    let transitions = match args.transition_at {
        Some(mut t) => {
            t.sort_unstable();
            t
        }
        None => place_transitions(args.frames, args.transitions, args.seed)?,
    };
    let spec = SyntheticSpec {
        dimension: args.dim,
        total_frames: args.frames,
        transitions,
        drift_step: args.drift_step,
        turn_angle: args.turn_angle,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
        frame_interval: 1.0 / args.fps,
    };
    let stream = generate(&spec)?;
    let sidecar = write_labeled(&args.output, &stream)?;
    eprintln!(
        "wrote {} frames to {} and {} transitions to {}",
        stream.frames.len(),
        args.output.display(),
        stream.ground_truth.len(),
        sidecar.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let (paths, grid) = match &args.manifest {
        Some(path) => {
            require_file(path)?;
            let manifest = RunManifest::from_json(&fs::read_to_string(path)?)?;
            let paths: Vec<PathBuf> = manifest.streams.iter().map(|s| s.path.clone()).collect();
            (paths, manifest.grid)
        }
        None => {
            let dir = args
                .streams
                .as_ref()
                .ok_or_else(|| CliError::config("--streams or --manifest is required"))?;
            if !dir.is_dir() {
                return Err(CliError::config(format!("not a directory: {}", dir.display())));
            }
            let defaults = SweepGrid::default();
            let grid = SweepGrid {
                strategies: args.strategies.clone().unwrap_or(defaults.strategies),
                lambdas: args.lambda.clone().unwrap_or(defaults.lambdas),
                k1s: args.k1.clone().unwrap_or(defaults.k1s),
                k2s: args.k2.clone().unwrap_or(defaults.k2s),
                gammas: args.gamma.clone().unwrap_or(defaults.gammas),
                capacities: args.capacity.clone().unwrap_or(defaults.capacities),
                budgets: args.budget.clone().unwrap_or(defaults.budgets),
                window: args.window,
            };
            (list_stream_files(dir)?, grid)
        }
    };
    if paths.is_empty() {
        return Err(CliError::config("no stream files found"));
    }
    for p in &paths {
        require_file(p)?;
    }
    let streams: Vec<NamedStream> = paths.iter().map(|p| load_labeled(p)).collect::<Result<_, _>>()?;
    let trace_dir = args.run_dir.as_ref().map(|d| d.join("traces"));
    let report = run_sweep(&streams, &grid, trace_dir.as_deref())?;

    let manifest = RunManifest::new(&paths, &streams, &grid).to_json();
    if let Some(dir) = &args.run_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), &manifest)?;
    }
    let csv = report.to_csv_string()?;
    write_output(args.output.as_deref(), csv.as_bytes())?;
    let errored = report.rows.iter().filter(|r| r.status != "ok").count();
    eprintln!(
        "{} rows ({} errored) over {} streams",
        report.rows.len(),
        errored,
        streams.len()
    );
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<u8, CliError> {
    let cfg = args.config.resolve()?;
    if args.config.print_config {
        print!("{cfg}");
        return Ok(0);
    }
    require_file(&args.trace)?;
    let recorded = fs::read_to_string(&args.trace)?;
    let frames = load_frames(&args.input, args.format)?;
    let (recomputed, _) = render_trace(&cfg, &frames)?;
    match compare_traces(&recorded, &recomputed) {
        ReplayVerdict::Match => {
            println!("MATCH");
            Ok(0)
        }
        ReplayVerdict::Diverge { line, expected, found } => {
            println!("DIVERGE at line {line}");
            eprintln!("expected: {}", expected.as_deref().unwrap_or("<end of trace>"));
            eprintln!("found:    {}", found.as_deref().unwrap_or("<end of trace>"));
            Ok(EXIT_DIVERGE)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        None if cli.print_config => {
            let mut out = BufWriter::new(io::stdout().lock());
            write!(out, "{}", RunConfig::default())?;
            out.flush()?;
            Ok(0)
        }
        None => Err(CliError::config("no subcommand given; see --help")),
        Some(Command::Score(a)) => cmd_score(a).map(|_| 0),
        Some(Command::Simulate(a)) => cmd_simulate(a).map(|_| 0),
        Some(Command::Eval(a)) => cmd_eval(a).map(|_| 0),
        Some(Command::Replay(a)) => cmd_replay(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
