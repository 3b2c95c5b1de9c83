use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use slammot::io::{self, EstimateRow};

use crate::run::RunManifest;
use crate::{CliResult, Failure};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Output directory of a `run`.
    #[arg(long)]
    pub report: PathBuf,
    /// Trial whose trajectories are drawn.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    /// Where the SVG files go; defaults to `<report>/plots`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 5] = ["#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

/// Linear map from data bounds onto the drawing area; y grows upwards.
struct Frame {
    x: [f64; 2],
    y: [f64; 2],
}

impl Frame {
    fn fit(series: &[Series]) -> Self {
        let pts = series.iter().flat_map(|s| s.points.iter());
        let (mut x, mut y) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
        for &(px, py) in pts {
            x = [x[0].min(px), x[1].max(px)];
            y = [y[0].min(py), y[1].max(py)];
        }
        let pad = |r: [f64; 2]| {
            if !r[0].is_finite() {
                [0.0, 1.0]
            } else if r[1] - r[0] < 1e-9 {
                [r[0] - 0.5, r[1] + 0.5]
            } else {
                r
            }
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x[0]) / (self.x[1] - self.x[0]) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y[0]) / (self.y[1] - self.y[0]) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], bands: &[[f64; 2]]) -> String {
    let f = Frame::fit(series);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for [a, b] in bands {
        let (x0, x1) = (f.px(*a), f.px(*b));
        let _ = writeln!(
            s,
            r##"<rect class="segment" x="{x0:.2}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="#cccccc" fill-opacity="0.4"/>"##,
            x1 - x0,
            HEIGHT - 2.0 * MARGIN
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="25" text-anchor="middle" font-size="16">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel} [{:.2}, {:.2}]</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        f.x[0],
        f.x[1]
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{ylabel} [{:.2}, {:.2}]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        f.y[0],
        f.y[1]
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            ser.label,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 80.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

fn poses(rows: &[EstimateRow]) -> Vec<&EstimateRow> {
    rows.iter().filter(|r| r.kind == "pose").collect()
}

fn read(path: &Path) -> CliResult<Vec<EstimateRow>> {
    Ok(io::read_estimates(io::open(path)?, path)?)
}

pub fn plot(args: &PlotArgs) -> CliResult {
    let manifest_path = args.report.join("run.json");
    if !manifest_path.exists() {
        return Err(Failure::validation(anyhow!("{} has no run.json", args.report.display())));
    }
    let manifest: RunManifest = io::read_json(&manifest_path)?;
    let dir = args.report.join("trials").join(format!("{:03}", args.trial));
    let truth_path = dir.join("truth.csv");
    let truth = if truth_path.exists() {
        Some(io::read_truth(io::open(&truth_path)?, &truth_path)?)
    } else {
        None
    };
    let mut traj = Vec::new();
    if let Some(t) = &truth {
        traj.push(Series {
            label: "truth".into(),
            points: t.poses.iter().map(|p| (p.center().x, p.center().z)).collect(),
        });
    }
    let mut errors = Vec::new();
    for level in &manifest.levels {
        let path = dir.join(format!("{level}.csv"));
        if !path.exists() {
            return Err(Failure::validation(anyhow!("missing estimate file {}", path.display())));
        }
        let rows = read(&path)?;
        let est = poses(&rows);
        traj.push(Series {
            label: level.to_string(),
            points: est.iter().map(|r| (r.position.x, r.position.z)).collect(),
        });
        if let Some(t) = &truth {
            errors.push(Series {
                label: level.to_string(),
                points: est
                    .iter()
                    .filter_map(|r| {
                        let c = t.poses.get(r.frame)?.center();
                        Some((r.frame as f64, (r.position - c).norm()))
                    })
                    .collect(),
            });
        }
    }
    let out = args.out.clone().unwrap_or_else(|| args.report.join("plots"));
    std::fs::create_dir_all(&out).map_err(|e| anyhow!("{}: {e}", out.display()))?;
    let write = |name: &str, body: String| -> CliResult {
        std::fs::write(out.join(name), body).map_err(|e| Failure::Runtime(anyhow!("{}: {e}", out.join(name).display())))
    };
    write("trajectory.svg", svg("Trajectory (x–z)", "x (m)", "z (m)", &traj, &[]))?;
    if !errors.is_empty() {
        let bands: Vec<[f64; 2]> = manifest.segments.iter().map(|[a, b]| [*a as f64, *b as f64]).collect();
        write("errors.svg", svg("Per-frame position error", "frame", "error (m)", &errors, &bands))?;
    }
    Ok(())
}
