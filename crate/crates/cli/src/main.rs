mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slammot::io::{self, SequenceMeta};
use slammot::pipeline::LevelId;
use slammot::sim::{self, ScenarioConfig};

/// Validation problems exit with 2, runtime failures with 3.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn validation(e: impl Into<anyhow::Error>) -> Self {
        Failure::Validation(e.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

/// Bad input and unreadable files map to validation failures.
impl From<slammot::Error> for Failure {
    fn from(e: slammot::Error) -> Self {
        if e.is_validation() || matches!(e, slammot::Error::Io { .. }) {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "slammot", version, about = "Multi-model SLAMMOT backend: simulate, run, compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth and noisy measurements for a scenario.
    Simulate(ScenarioArgs),
    /// Run methodology levels over Monte Carlo trials and write metric reports.
    Run(run::RunArgs),
    /// Convert external detections and absolute odometry into a measurement file.
    Ingest(IngestArgs),
    /// Write a scenario's detections and integrated odometry in the ingest format.
    Export(ScenarioArgs),
    /// Draw trajectory and error plots from a run report.
    Plot(plot::PlotArgs),
    /// Check CSV files against the known table layouts.
    CheckSchema {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// List the builtin scenarios.
    Scenarios,
}

#[derive(Args, Clone, Debug)]
pub struct ScenarioArgs {
    /// Builtin scenario name or path to a scenario JSON file.
    #[arg(long, default_value = "transition")]
    pub scenario: String,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplier applied to every noise σ.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    detections: PathBuf,
    /// Absolute camera-to-world poses, one 3×4 row-major matrix per frame.
    #[arg(long)]
    odometry: PathBuf,
    /// Sequence constants (dt, intrinsics, image size); defaults when omitted.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn load_scenario(name: &str) -> CliResult<ScenarioConfig> {
    if let Some(cfg) = sim::builtin_scenario(name) {
        return Ok(cfg);
    }
    let path = Path::new(name);
    if !path.exists() {
        let names: Vec<String> = sim::builtin_scenarios().into_iter().map(|s| s.name).collect();
        return Err(Failure::validation(anyhow::anyhow!(
            "`{name}` is neither a builtin scenario ({}) nor a file",
            names.join(", ")
        )));
    }
    let cfg: ScenarioConfig = io::read_json(path)?;
    Ok(cfg)
}

/// Applies seed and noise overrides, then validates.
pub fn resolve_scenario(args: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !(args.noise_scale >= 0.0 && args.noise_scale.is_finite()) {
        return Err(Failure::validation(anyhow::anyhow!(
            "--noise-scale must be a non-negative number, got {}",
            args.noise_scale
        )));
    }
    cfg.noise = cfg.noise.scaled(args.noise_scale);
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &ScenarioArgs) -> CliResult {
    let cfg = resolve_scenario(args)?;
    let (truth, seq) = sim::simulate(&cfg)?;
    io::write_truth(io::create(&args.out.join("truth.csv"))?, &truth)?;
    io::write_measurements(io::create(&args.out.join("measurements.csv"))?, &seq)?;
    io::write_json(&args.out.join("config.json"), &cfg)?;
    log::info!("wrote {} frames to {}", seq.frames.len(), args.out.display());
    Ok(())
}

fn export(args: &ScenarioArgs) -> CliResult {
    let cfg = resolve_scenario(args)?;
    let (truth, seq) = sim::simulate(&cfg)?;
    let (detections, poses) = io::export(&seq);
    io::write_detections(io::create(&args.out.join("detections.csv"))?, &detections)?;
    io::write_odometry(io::create(&args.out.join("odometry.csv"))?, &poses)?;
    io::write_truth(io::create(&args.out.join("truth.csv"))?, &truth)?;
    io::write_json(&args.out.join("sequence.json"), &SequenceMeta::of(&seq))?;
    Ok(())
}

fn ingest(args: &IngestArgs) -> CliResult {
    let meta = match &args.meta {
        Some(p) => io::read_json::<io::SequenceSource>(p)?.meta(),
        None => SequenceMeta::default(),
    };
    let detections = io::read_detections(io::open(&args.detections)?, &args.detections)?;
    let poses = io::read_odometry(io::open(&args.odometry)?, &args.odometry)?;
    let seq = io::ingest(&detections, &poses, &meta)?;
    io::write_measurements(io::create(&args.out.join("measurements.csv"))?, &seq)?;
    io::write_json(&args.out.join("sequence.json"), &meta)?;
    Ok(())
}

fn check_schema(files: &[PathBuf]) -> CliResult {
    let mut bad = 0;
    for f in files {
        match io::check_schema(f) {
            Ok((name, rows)) => println!("{}: {name} ({rows} rows)", f.display()),
            Err(e) => {
                eprintln!("{}: {e}", f.display());
                bad += 1;
            }
        }
    }
    if bad > 0 {
        return Err(Failure::validation(anyhow::anyhow!("{bad} file(s) failed the schema check")));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Run(a) => run::run(&a),
        Command::Ingest(a) => ingest(&a),
        Command::Export(a) => export(&a),
        Command::Plot(a) => plot::plot(&a),
        Command::CheckSchema { files } => check_schema(&files),
        Command::Scenarios => {
            for s in sim::builtin_scenarios() {
                let seg = s.transition_segment.map(|[a, b]| format!("{a}:{b}")).unwrap_or_default();
                println!("{:14} frames {:3} objects {} segment {seg}", s.name, s.frames, s.objects.len());
            }
            Ok(())
        }
    }
}

pub fn parse_levels(s: &str) -> CliResult<Vec<LevelId>> {
    let levels = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<LevelId>())
        .collect::<Result<Vec<_>, _>>()?;
    if levels.is_empty() {
        return Err(Failure::validation(anyhow::anyhow!("--levels is empty")));
    }
    Ok(levels)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Validation(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
