use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use slammot::io::{self, AggregateRow, MetricRow, SequenceSource, TimingRow};
use slammot::metrics::{evaluate, summarize};
use slammot::pipeline::{run_level, EstimateLog, LevelId, PipelineConfig};
use slammot::sim::{self, GroundTruth, MeasurementSequence, ScenarioConfig};

use crate::{load_scenario, parse_levels, CliResult, Failure};

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Builtin scenario name or path to a scenario JSON file.
    #[arg(long, default_value = "transition", conflicts_with = "measurements")]
    pub scenario: String,
    /// Comma-separated subset of L0, L1, L2, L3.
    #[arg(long, default_value = "L0,L1,L2,L3")]
    pub levels: String,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Seed of the first trial; trial `k` uses `seed + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frames per optimization window.
    #[arg(long)]
    pub window: Option<usize>,
    /// Extra evaluation range `a:b` (half-open); repeatable. Defaults to the
    /// scenario's transition segment.
    #[arg(long = "segment")]
    pub segments: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Multiplier applied to every noise σ.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// Worker threads for trials; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Pipeline configuration JSON replacing the noise-matched defaults.
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
    /// Measurement CSV to run instead of simulating a scenario.
    #[arg(long, requires = "config")]
    pub measurements: Option<PathBuf>,
    /// Scenario or sequence JSON accompanying `--measurements`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground truth CSV for metrics in `--measurements` mode.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Resolved settings of a run, stored next to its outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub levels: Vec<LevelId>,
    pub trials: usize,
    pub seed: u64,
    pub segments: Vec<[usize; 2]>,
    pub noise_scale: f64,
    pub pipeline: PipelineConfig,
    /// Seconds since the Unix epoch; the only nondeterministic field.
    pub created_unix: u64,
}

pub fn parse_segment(s: &str) -> CliResult<[usize; 2]> {
    let bad = || Failure::validation(anyhow!("segment `{s}` is not of the form a:b with a < b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a >= b {
        return Err(bad());
    }
    Ok([a, b])
}

fn segment_label(s: Option<[usize; 2]>) -> String {
    s.map_or("full".into(), |[a, b]| format!("{a}:{b}"))
}

/// Where the measurements of each trial come from.
enum Source {
    Scenario(ScenarioConfig),
    Files {
        seq: MeasurementSequence,
        truth: Option<GroundTruth>,
        name: String,
    },
}

impl Source {
    fn name(&self) -> String {
        match self {
            Source::Scenario(c) => c.name.clone(),
            Source::Files { name, .. } => name.clone(),
        }
    }

    fn trial(&self, seed: u64) -> slammot::Result<(MeasurementSequence, Option<GroundTruth>)> {
        match self {
            Source::Scenario(c) => {
                let mut cfg = c.clone();
                cfg.seed = seed;
                let (truth, seq) = sim::simulate(&cfg)?;
                Ok((seq, Some(truth)))
            }
            Source::Files { seq, truth, .. } => Ok((seq.clone(), truth.clone())),
        }
    }
}

/// Metrics keyed by segment name, then metric name.
type SegmentMetrics = BTreeMap<String, BTreeMap<String, f64>>;

struct LevelOutcome {
    level: LevelId,
    result: Result<(SegmentMetrics, Vec<TimingRow>), String>,
}

fn run_trial(
    source: &Source,
    levels: &[LevelId],
    pipeline: &PipelineConfig,
    segments: &[Option<[usize; 2]>],
    trial: usize,
    seed: u64,
    out: &Path,
) -> slammot::Result<Vec<LevelOutcome>> {
    let (seq, truth) = source.trial(seed)?;
    let dir = out.join("trials").join(format!("{trial:03}"));
    if let Some(t) = &truth {
        io::write_truth(io::create(&dir.join("truth.csv"))?, t)?;
    }
    let mut outcomes = Vec::new();
    for &level in levels {
        let result = run_level(level, &seq, pipeline).and_then(|log| {
            io::write_estimates(io::create(&dir.join(format!("{level}.csv")))?, &log)?;
            let metrics = match &truth {
                Some(t) => segments
                    .iter()
                    .map(|s| {
                        let range = s.map(|[a, b]| a..b);
                        Ok((segment_label(*s), evaluate(&log, t, range)?))
                    })
                    .collect::<slammot::Result<_>>()?,
                None => BTreeMap::new(),
            };
            Ok((metrics, timing(&log, trial as u64)))
        });
        outcomes.push(LevelOutcome {
            level,
            result: result.map_err(|e| e.to_string()),
        });
    }
    Ok(outcomes)
}

fn timing(log: &EstimateLog, trial: u64) -> Vec<TimingRow> {
    log.frames
        .iter()
        .map(|f| TimingRow {
            level: log.level.to_string(),
            trial,
            frame: f.frame,
            elapsed_ms: f.elapsed_ms,
            iterations: f.solver.as_ref().map_or(0, |s| s.iterations),
        })
        .collect()
}

fn resolve_source(args: &RunArgs) -> CliResult<(Source, PipelineConfig)> {
    let scale = args.noise_scale;
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Failure::validation(anyhow!("--noise-scale must be a non-negative number, got {scale}")));
    }
    let (source, noise) = match &args.measurements {
        Some(path) => {
            if args.trials != 1 {
                return Err(Failure::validation(anyhow!("--measurements runs a fixed sequence; use --trials 1")));
            }
            let config = args.config.as_ref().expect("required by clap");
            let src: SequenceSource = io::read_json(config)?;
            let seq = io::read_measurements(io::open(path)?, path, &src.meta())?;
            let truth = match &args.truth {
                Some(t) => Some(io::read_truth(io::open(t)?, t)?),
                None => None,
            };
            let noise = match &src {
                SequenceSource::Scenario(s) => Some(s.noise.clone()),
                SequenceSource::Meta(_) => None,
            };
            let name = path.file_stem().map_or("measurements".into(), |s| s.to_string_lossy().into_owned());
            (Source::Files { seq, truth, name }, noise)
        }
        None => {
            let mut cfg = load_scenario(&args.scenario)?;
            cfg.noise = cfg.noise.scaled(scale);
            cfg.validate()?;
            let noise = cfg.noise.clone();
            (Source::Scenario(cfg), Some(noise))
        }
    };
    let mut pipeline = match (&args.pipeline, noise) {
        (Some(p), _) => io::read_json(p)?,
        (None, Some(n)) => PipelineConfig::matched(&n),
        (None, None) => PipelineConfig::default(),
    };
    if let Some(w) = args.window {
        pipeline.window = w;
    }
    pipeline.validate()?;
    Ok((source, pipeline))
}

pub fn run(args: &RunArgs) -> CliResult {
    let levels = parse_levels(&args.levels)?;
    if args.trials == 0 {
        return Err(Failure::validation(anyhow!("--trials must be at least 1")));
    }
    let (source, pipeline) = resolve_source(args)?;
    let mut segments: Vec<[usize; 2]> = args.segments.iter().map(|s| parse_segment(s)).collect::<CliResult<_>>()?;
    if segments.is_empty() {
        if let Source::Scenario(c) = &source {
            segments.extend(c.transition_segment);
        }
    }
    let ranges: Vec<Option<[usize; 2]>> = std::iter::once(None).chain(segments.iter().copied().map(Some)).collect();
    let name = source.name();
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::validation(anyhow!("{}: {e}", args.out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    // Collected in trial order regardless of completion order.
    let results: Vec<slammot::Result<Vec<LevelOutcome>>> = pool.install(|| {
        (0..args.trials)
            .into_par_iter()
            .map(|k| run_trial(&source, &levels, &pipeline, &ranges, k, args.seed + k as u64, &args.out))
            .collect()
    });

    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut failures = String::from("level,trial,seed,error\n");
    let mut failed = 0;
    for (k, res) in results.into_iter().enumerate() {
        let seed = args.seed + k as u64;
        let outcomes = match res {
            Ok(o) => o,
            Err(e) => {
                for level in &levels {
                    let _ = writeln!(failures, "{level},{k},{seed},\"{e}\"");
                    failed += 1;
                }
                continue;
            }
        };
        for o in outcomes {
            match o.result {
                Ok((metrics, t)) => {
                    timings.extend(t);
                    for (segment, values) in metrics {
                        for (metric, value) in values {
                            rows.push(MetricRow {
                                level: o.level.to_string(),
                                scenario: name.clone(),
                                trial: k as u64,
                                segment: segment.clone(),
                                metric,
                                value,
                            });
                        }
                    }
                }
                Err(e) => {
                    let _ = writeln!(failures, "{},{k},{seed},\"{}\"", o.level, e.replace('"', "'"));
                    failed += 1;
                }
            }
        }
    }

    io::write_metrics(io::create(&args.out.join("metrics.csv"))?, &rows)?;
    let aggregate = aggregate(&rows, &levels, &name);
    io::write_aggregate(io::create(&args.out.join("aggregate.csv"))?, &aggregate)?;
    io::write_timing(io::create(&args.out.join("timing.csv"))?, &timings)?;
    std::fs::write(args.out.join("table.md"), table(&aggregate, &levels, &ranges))
        .map_err(|e| anyhow!("{}: {e}", args.out.display()))?;
    if failed > 0 {
        std::fs::write(args.out.join("failures.csv"), failures).map_err(|e| anyhow!("{e}"))?;
    }
    let manifest = RunManifest {
        scenario: name,
        levels,
        trials: args.trials,
        seed: args.seed,
        segments,
        noise_scale: args.noise_scale,
        pipeline,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    io::write_json(&args.out.join("run.json"), &manifest)?;
    print!("{}", std::fs::read_to_string(args.out.join("table.md")).unwrap_or_default());
    if failed > 0 {
        return Err(Failure::Runtime(anyhow!("{failed} level run(s) failed; see failures.csv")));
    }
    Ok(())
}

fn aggregate(rows: &[MetricRow], levels: &[LevelId], scenario: &str) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let li = levels.iter().position(|l| l.to_string() == r.level).unwrap_or(usize::MAX);
        groups.entry((li, &r.segment, &r.metric)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .filter_map(|((li, segment, metric), values)| {
            Some(AggregateRow {
                level: levels.get(li)?.to_string(),
                scenario: scenario.to_string(),
                segment: segment.to_string(),
                metric: metric.to_string(),
                summary: summarize(&values)?,
            })
        })
        .collect()
}

/// Markdown comparison table: one block per segment, levels as rows.
fn table(aggregate: &[AggregateRow], levels: &[LevelId], ranges: &[Option<[usize; 2]>]) -> String {
    let mut s = String::new();
    for r in ranges {
        let label = segment_label(*r);
        let _ = writeln!(s, "### {}\n", if r.is_none() { "full sequence".to_string() } else { format!("segment {label}") });
        let _ = writeln!(s, "| level | APE (m) | RPE (m/f) | MOTP (m) |");
        let _ = writeln!(s, "|---|---|---|---|");
        for level in levels {
            let cell = |metric: &str| {
                aggregate
                    .iter()
                    .find(|a| a.level == level.to_string() && a.segment == label && a.metric == metric)
                    .map_or("-".to_string(), |a| format!("{:.4} ± {:.4}", a.summary.mean, a.summary.std))
            };
            let _ = writeln!(s, "| {level} | {} | {} | {} |", cell("ape"), cell("rpe"), cell("motp"));
        }
        s.push('\n');
    }
    s
}
