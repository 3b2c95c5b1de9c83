//! CSV and JSON file formats.
//!
//! Every table is written with a header row. Floats use Rust's shortest
//! round-trip formatting, so a write followed by a read is lossless.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, Se3Pose};
use crate::metrics::Summary;
use crate::motion::{FullState, ModelId};
use crate::pipeline::EstimateLog;
use crate::sim::{
    FrameMeasurements, GroundTruth, Landmark, MeasurementSequence, ObjectDetection, ObjectTruth, PixelObservation,
    ScenarioConfig,
};
use crate::{Error, Result};

pub const MEASUREMENT_HEADER: [&str; 15] = [
    "frame", "kind", "id", "v1", "v2", "v3", "v4", "v5", "v6", "v7", "v8", "v9", "v10", "v11", "v12",
];
pub const TRUTH_HEADER: [&str; 16] = [
    "frame", "kind", "id", "model", "v1", "v2", "v3", "v4", "v5", "v6", "v7", "v8", "v9", "v10", "v11", "v12",
];
pub const METRICS_HEADER: [&str; 6] = ["level", "scenario", "trial", "segment", "metric", "value"];
pub const AGGREGATE_HEADER: [&str; 8] = ["level", "scenario", "segment", "metric", "mean", "std", "median", "count"];
pub const TIMING_HEADER: [&str; 5] = ["level", "trial", "frame", "elapsed_ms", "iterations"];
pub const ESTIMATE_HEADER: [&str; 14] = [
    "frame", "kind", "id", "model", "x", "y", "z", "heading", "v", "omega", "w_cp", "w_cv", "w_ctrv", "measured",
];
pub const DETECTIONS_HEADER: [&str; 7] = ["frame", "track_id", "x", "y", "z", "theta", "score"];
pub const ODOMETRY_HEADER: [&str; 13] = [
    "frame", "r11", "r12", "r13", "t1", "r21", "r22", "r23", "t2", "r31", "r32", "r33", "t3",
];

/// Named CSV layouts known to `check-schema`.
pub const SCHEMAS: [(&str, &[&str]); 8] = [
    ("measurements", &MEASUREMENT_HEADER),
    ("truth", &TRUTH_HEADER),
    ("metrics", &METRICS_HEADER),
    ("aggregate", &AGGREGATE_HEADER),
    ("timing", &TIMING_HEADER),
    ("estimates", &ESTIMATE_HEADER),
    ("detections", &DETECTIONS_HEADER),
    ("odometry", &ODOMETRY_HEADER),
];

/// Sequence-level constants that the measurement table does not carry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceMeta {
    pub dt: f64,
    pub intrinsics: CameraIntrinsics,
    pub image_size: [u32; 2],
}

impl SequenceMeta {
    pub fn of(seq: &MeasurementSequence) -> Self {
        Self {
            dt: seq.dt,
            intrinsics: seq.intrinsics,
            image_size: seq.image_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        self.intrinsics.validate()
    }
}

impl Default for SequenceMeta {
    fn default() -> Self {
        Self {
            dt: 0.1,
            intrinsics: CameraIntrinsics::default(),
            image_size: [1242, 375],
        }
    }
}

/// A JSON config accepted next to a measurement file: either a full
/// scenario or the bare sequence constants written by `ingest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceSource {
    Scenario(Box<ScenarioConfig>),
    Meta(SequenceMeta),
}

impl SequenceSource {
    pub fn meta(&self) -> SequenceMeta {
        match self {
            SequenceSource::Scenario(s) => SequenceMeta {
                dt: s.dt,
                intrinsics: s.intrinsics,
                image_size: s.image_size,
            },
            SequenceSource::Meta(m) => *m,
        }
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Row of a fixed-width table; unused trailing value columns stay empty.
fn padded(prefix: Vec<String>, values: &[f64], width: usize) -> Vec<String> {
    let mut row = prefix;
    row.extend(values.iter().map(|v| num(*v)));
    row.resize(width, String::new());
    row
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Cursor over the data rows of a CSV table, reporting errors by file and line.
struct Rows<R: Read> {
    file: PathBuf,
    reader: csv::Reader<R>,
}

struct Row {
    file: PathBuf,
    line: usize,
    record: csv::StringRecord,
}

impl<R: Read> Rows<R> {
    fn new(r: R, file: &Path, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(r);
        let found = reader.headers()?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                file: file.to_path_buf(),
                line: 1,
                message: format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            });
        }
        Ok(Self {
            file: file.to_path_buf(),
            reader,
        })
    }
}

impl<R: Read> Iterator for Rows<R> {
    type Item = Result<Row>;

    fn next(&mut self) -> Option<Result<Row>> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => None,
            Ok(true) => Some(Ok(Row {
                file: self.file.clone(),
                line: record.position().map_or(0, |p| p.line() as usize),
                record,
            })),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Some(Err(Error::Parse {
                    file: self.file.clone(),
                    line,
                    message: e.to_string(),
                }))
            }
        }
    }
}

impl Row {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn text(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, i: usize, what: &str) -> Result<T> {
        self.text(i)
            .trim()
            .parse()
            .map_err(|_| self.error(format!("bad {what} `{}`", self.text(i))))
    }

    fn float(&self, i: usize, what: &str) -> Result<f64> {
        let v: f64 = self.parse(i, what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(format!("{what} is not finite")))
        }
    }

    fn floats(&self, from: usize, n: usize) -> Result<Vec<f64>> {
        (from..from + n).map(|i| self.float(i, &format!("column {}", i + 1))).collect()
    }
}

pub fn write_measurements<W: Write>(w: W, seq: &MeasurementSequence) -> Result<()> {
    let mut out = writer(w, &MEASUREMENT_HEADER)?;
    for f in &seq.frames {
        let frame = f.frame.to_string();
        // Frame 0 carries the known starting pose instead of an increment.
        let odo = if f.frame == 0 { seq.initial_pose } else { f.odometry };
        out.write_record(padded(vec![frame.clone(), "odo".into(), "0".into()], &odo.to_row_major(), 15))?;
        for p in &f.pixels {
            let flag = if p.dynamic { 1.0 } else { 0.0 };
            out.write_record(padded(
                vec![frame.clone(), "pixel".into(), p.landmark_id.to_string()],
                &[p.pixel.x, p.pixel.y, flag],
                15,
            ))?;
        }
        for o in &f.objects {
            out.write_record(padded(
                vec![frame.clone(), "obj".into(), o.object_id.to_string()],
                &[o.position.x, o.position.y, o.position.z, o.theta, o.score],
                15,
            ))?;
        }
    }
    out.flush().map_err(|e| Error::io("<measurements>", e))
}

/// Reads a measurement table. Frames must be contiguous from zero and each
/// must carry exactly one odometry row.
pub fn read_measurements<R: Read>(r: R, file: &Path, meta: &SequenceMeta) -> Result<MeasurementSequence> {
    meta.validate()?;
    let mut frames: Vec<FrameMeasurements> = Vec::new();
    let mut initial_pose = None;
    let mut has_odo: Vec<bool> = Vec::new();
    for row in Rows::new(r, file, &MEASUREMENT_HEADER)? {
        let row = row?;
        let frame: usize = row.parse(0, "frame")?;
        if frame > frames.len() {
            return Err(row.error(format!("frame {frame} skips frame {}", frames.len())));
        }
        if frame + 1 < frames.len() {
            return Err(row.error(format!("frame {frame} appears after frame {}", frames.len() - 1)));
        }
        if frame == frames.len() {
            frames.push(FrameMeasurements {
                frame,
                pixels: Vec::new(),
                odometry: Se3Pose::identity(),
                objects: Vec::new(),
            });
            has_odo.push(false);
        }
        let id: u64 = row.parse(2, "id")?;
        let current = frames.last_mut().expect("pushed above");
        match row.text(1) {
            "odo" => {
                if has_odo[frame] {
                    return Err(row.error(format!("second odometry row for frame {frame}")));
                }
                has_odo[frame] = true;
                let pose = Se3Pose::from_row_major(&row.floats(3, 12)?).map_err(|e| row.error(e.to_string()))?;
                if frame == 0 {
                    initial_pose = Some(pose);
                } else {
                    current.odometry = pose;
                }
            }
            "pixel" => {
                let v = row.floats(3, 3)?;
                current.pixels.push(PixelObservation {
                    landmark_id: id,
                    pixel: Vector2::new(v[0], v[1]),
                    dynamic: v[2] != 0.0,
                });
            }
            "obj" => {
                let v = row.floats(3, 5)?;
                current.objects.push(ObjectDetection {
                    object_id: id,
                    position: Vector3::new(v[0], v[1], v[2]),
                    theta: v[3],
                    score: v[4],
                });
            }
            other => return Err(row.error(format!("unknown row kind `{other}`"))),
        }
    }
    if frames.is_empty() {
        return Err(Error::Parse {
            file: file.to_path_buf(),
            line: 1,
            message: "no frames".into(),
        });
    }
    if let Some(missing) = has_odo.iter().position(|h| !h) {
        return Err(Error::Parse {
            file: file.to_path_buf(),
            line: 0,
            message: format!("frame {missing} has no odometry row"),
        });
    }
    Ok(MeasurementSequence {
        dt: meta.dt,
        intrinsics: meta.intrinsics,
        image_size: meta.image_size,
        initial_pose: initial_pose.expect("frame 0 checked"),
        frames,
    })
}

pub fn write_truth<W: Write>(w: W, truth: &GroundTruth) -> Result<()> {
    let mut out = writer(w, &TRUTH_HEADER)?;
    for (t, p) in truth.poses.iter().enumerate() {
        out.write_record(padded(
            vec![t.to_string(), "pose".into(), "0".into(), String::new()],
            &p.to_row_major(),
            16,
        ))?;
    }
    for o in &truth.objects {
        for (k, (s, m)) in o.states.iter().zip(&o.models).enumerate() {
            out.write_record(padded(
                vec![(o.start_frame + k).to_string(), "object".into(), o.id.to_string(), m.name().into()],
                &[s.x, o.y, s.z, s.theta, s.v, s.omega],
                16,
            ))?;
        }
    }
    for l in &truth.landmarks {
        out.write_record(padded(
            vec![String::new(), "landmark".into(), l.id.to_string(), String::new()],
            &[l.position.x, l.position.y, l.position.z],
            16,
        ))?;
    }
    out.flush().map_err(|e| Error::io("<truth>", e))
}

/// Reads a truth table. Object surface points are not stored and come back empty.
pub fn read_truth<R: Read>(r: R, file: &Path) -> Result<GroundTruth> {
    let mut poses = Vec::new();
    let mut objects: BTreeMap<u64, ObjectTruth> = BTreeMap::new();
    let mut landmarks = Vec::new();
    for row in Rows::new(r, file, &TRUTH_HEADER)? {
        let row = row?;
        let id: u64 = row.parse(2, "id")?;
        match row.text(1) {
            "pose" => {
                let frame: usize = row.parse(0, "frame")?;
                if frame != poses.len() {
                    return Err(row.error(format!("pose frame {frame}, expected {}", poses.len())));
                }
                poses.push(Se3Pose::from_row_major(&row.floats(4, 12)?).map_err(|e| row.error(e.to_string()))?);
            }
            "object" => {
                let frame: usize = row.parse(0, "frame")?;
                let model: ModelId = row.parse(3, "model")?;
                let v = row.floats(4, 6)?;
                let o = objects.entry(id).or_insert_with(|| ObjectTruth {
                    id,
                    y: v[1],
                    start_frame: frame,
                    states: Vec::new(),
                    models: Vec::new(),
                    surface_points: Vec::new(),
                });
                if frame != o.end_frame() {
                    return Err(row.error(format!("object {id} frame {frame}, expected {}", o.end_frame())));
                }
                o.states.push(FullState {
                    x: v[0],
                    z: v[2],
                    theta: v[3],
                    v: v[4],
                    omega: v[5],
                });
                o.models.push(model);
            }
            "landmark" => {
                let v = row.floats(4, 3)?;
                landmarks.push(Landmark {
                    id,
                    position: Vector3::new(v[0], v[1], v[2]),
                });
            }
            other => return Err(row.error(format!("unknown row kind `{other}`"))),
        }
    }
    let headings = poses.iter().map(Se3Pose::heading).collect();
    Ok(GroundTruth {
        poses,
        headings,
        landmarks,
        objects: objects.into_values().collect(),
    })
}

pub fn write_estimates<W: Write>(w: W, log: &EstimateLog) -> Result<()> {
    let mut out = writer(w, &ESTIMATE_HEADER)?;
    for f in &log.frames {
        let c = f.pose.center();
        let mut row = vec![f.frame.to_string(), "pose".into(), "0".into(), String::new()];
        row.extend([c.x, c.y, c.z, f.pose.heading()].map(num));
        row.resize(ESTIMATE_HEADER.len(), String::new());
        out.write_record(row)?;
        for o in &f.objects {
            let s = &o.state;
            let model = o.dominant_model().map_or("", ModelId::name);
            let mut row = vec![f.frame.to_string(), "object".into(), o.object_id.to_string(), model.into()];
            row.extend([s.x, o.y, s.z, s.theta, s.v, s.omega].map(num));
            for m in ModelId::ALL {
                row.push(o.weight_of(m).map(num).unwrap_or_default());
            }
            row.push(u8::from(o.measured).to_string());
            out.write_record(row)?;
        }
    }
    out.flush().map_err(|e| Error::io("<estimates>", e))
}

/// One row of an estimate table, as needed for plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRow {
    pub frame: usize,
    pub kind: String,
    pub id: u64,
    pub position: Vector3<f64>,
    pub heading: f64,
}

pub fn read_estimates<R: Read>(r: R, file: &Path) -> Result<Vec<EstimateRow>> {
    Rows::new(r, file, &ESTIMATE_HEADER)?
        .map(|row| {
            let row = row?;
            let v = row.floats(4, 4)?;
            Ok(EstimateRow {
                frame: row.parse(0, "frame")?,
                kind: row.text(1).to_string(),
                id: row.parse(2, "id")?,
                position: Vector3::new(v[0], v[1], v[2]),
                heading: v[3],
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub level: String,
    pub scenario: String,
    pub trial: u64,
    pub segment: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricRow]) -> Result<()> {
    let mut out = writer(w, &METRICS_HEADER)?;
    for r in rows {
        out.write_record([
            r.level.clone(),
            r.scenario.clone(),
            r.trial.to_string(),
            r.segment.clone(),
            r.metric.clone(),
            num(r.value),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<metrics>", e))
}

pub fn read_metrics<R: Read>(r: R, file: &Path) -> Result<Vec<MetricRow>> {
    Rows::new(r, file, &METRICS_HEADER)?
        .map(|row| {
            let row = row?;
            Ok(MetricRow {
                level: row.text(0).into(),
                scenario: row.text(1).into(),
                trial: row.parse(2, "trial")?,
                segment: row.text(3).into(),
                metric: row.text(4).into(),
                value: row.float(5, "value")?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub level: String,
    pub scenario: String,
    pub segment: String,
    pub metric: String,
    pub summary: Summary,
}

pub fn write_aggregate<W: Write>(w: W, rows: &[AggregateRow]) -> Result<()> {
    let mut out = writer(w, &AGGREGATE_HEADER)?;
    for r in rows {
        let s = &r.summary;
        out.write_record([
            r.level.clone(),
            r.scenario.clone(),
            r.segment.clone(),
            r.metric.clone(),
            num(s.mean),
            num(s.std),
            num(s.median),
            s.count.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<aggregate>", e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub level: String,
    pub trial: u64,
    pub frame: usize,
    pub elapsed_ms: f64,
    pub iterations: usize,
}

pub fn write_timing<W: Write>(w: W, rows: &[TimingRow]) -> Result<()> {
    let mut out = writer(w, &TIMING_HEADER)?;
    for r in rows {
        out.write_record([
            r.level.clone(),
            r.trial.to_string(),
            r.frame.to_string(),
            num(r.elapsed_ms),
            r.iterations.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<timing>", e))
}

/// One externally produced object detection, camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub frame: usize,
    pub track_id: u64,
    pub position: Vector3<f64>,
    pub theta: f64,
    pub score: f64,
}

pub fn read_detections<R: Read>(r: R, file: &Path) -> Result<Vec<DetectionRecord>> {
    Rows::new(r, file, &DETECTIONS_HEADER)?
        .map(|row| {
            let row = row?;
            let v = row.floats(2, 5)?;
            Ok(DetectionRecord {
                frame: row.parse(0, "frame")?,
                track_id: row.parse(1, "track_id")?,
                position: Vector3::new(v[0], v[1], v[2]),
                theta: v[3],
                score: v[4],
            })
        })
        .collect()
}

pub fn write_detections<W: Write>(w: W, records: &[DetectionRecord]) -> Result<()> {
    let mut out = writer(w, &DETECTIONS_HEADER)?;
    for d in records {
        let mut row = vec![d.frame.to_string(), d.track_id.to_string()];
        row.extend([d.position.x, d.position.y, d.position.z, d.theta, d.score].map(num));
        out.write_record(row)?;
    }
    out.flush().map_err(|e| Error::io("<detections>", e))
}

/// Reads absolute camera-to-world poses (KITTI layout), one per frame,
/// contiguous from zero.
pub fn read_odometry<R: Read>(r: R, file: &Path) -> Result<Vec<Se3Pose>> {
    let mut poses = Vec::new();
    for row in Rows::new(r, file, &ODOMETRY_HEADER)? {
        let row = row?;
        let frame: usize = row.parse(0, "frame")?;
        if frame != poses.len() {
            return Err(row.error(format!("odometry frame {frame}, expected {}", poses.len())));
        }
        poses.push(Se3Pose::from_row_major(&row.floats(1, 12)?).map_err(|e| row.error(e.to_string()))?);
    }
    Ok(poses)
}

pub fn write_odometry<W: Write>(w: W, poses: &[Se3Pose]) -> Result<()> {
    let mut out = writer(w, &ODOMETRY_HEADER)?;
    for (t, p) in poses.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(p.to_row_major().map(num));
        out.write_record(row)?;
    }
    out.flush().map_err(|e| Error::io("<odometry>", e))
}

/// Builds a landmark-free measurement sequence from absolute odometry and
/// detections. Detections past the last odometry frame are rejected.
pub fn ingest(detections: &[DetectionRecord], odometry: &[Se3Pose], meta: &SequenceMeta) -> Result<MeasurementSequence> {
    meta.validate()?;
    if odometry.is_empty() {
        return Err(Error::invalid("odometry has no frames"));
    }
    // Absolute poses are camera-to-world; the pipeline works with T_cw.
    let cw: Vec<Se3Pose> = odometry.iter().map(Se3Pose::inverse).collect();
    let mut frames: Vec<FrameMeasurements> = cw
        .iter()
        .enumerate()
        .map(|(t, pose)| FrameMeasurements {
            frame: t,
            pixels: Vec::new(),
            odometry: if t == 0 {
                Se3Pose::identity()
            } else {
                pose.compose(&odometry[t - 1])
            },
            objects: Vec::new(),
        })
        .collect();
    for d in detections {
        let Some(f) = frames.get_mut(d.frame) else {
            return Err(Error::invalid(format!(
                "detection at frame {} but odometry ends at frame {}",
                d.frame,
                odometry.len() - 1
            )));
        };
        if !(d.position.iter().all(|v| v.is_finite()) && d.theta.is_finite() && d.score.is_finite()) {
            return Err(Error::invalid(format!("non-finite detection at frame {}", d.frame)));
        }
        f.objects.push(ObjectDetection {
            object_id: d.track_id,
            position: d.position,
            theta: d.theta,
            score: d.score,
        });
    }
    Ok(MeasurementSequence {
        dt: meta.dt,
        intrinsics: meta.intrinsics,
        image_size: meta.image_size,
        initial_pose: cw[0],
        frames,
    })
}

/// Inverse of [`ingest`]: absolute camera-to-world poses from integrated
/// odometry, plus the detections. Pixel observations are dropped.
pub fn export(seq: &MeasurementSequence) -> (Vec<DetectionRecord>, Vec<Se3Pose>) {
    let mut pose = seq.initial_pose;
    let mut poses = Vec::with_capacity(seq.frames.len());
    let mut detections = Vec::new();
    for f in &seq.frames {
        if f.frame > 0 {
            pose = f.odometry.compose(&pose);
        }
        poses.push(pose.inverse());
        detections.extend(f.objects.iter().map(|o| DetectionRecord {
            frame: f.frame,
            track_id: o.object_id,
            position: o.position,
            theta: o.theta,
            score: o.score,
        }));
    }
    (detections, poses)
}

/// Matches a header row against the known schemas.
pub fn detect_schema(header: &[&str]) -> Option<&'static str> {
    SCHEMAS
        .iter()
        .find(|(_, h)| h.iter().copied().eq(header.iter().copied()))
        .map(|(name, _)| *name)
}

/// Checks that a CSV file has a known header and that every row has the
/// header's width. Returns the schema name and the data row count.
pub fn check_schema(path: &Path) -> Result<(&'static str, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(open(path)?);
    let header = reader.headers()?.clone();
    let fields: Vec<&str> = header.iter().collect();
    let name = detect_schema(&fields).ok_or_else(|| Error::Parse {
        file: path.to_path_buf(),
        line: 1,
        message: format!("unknown header `{}`", fields.join(",")),
    })?;
    let mut count = 0;
    for record in reader.records() {
        record.map_err(|e| Error::Parse {
            file: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        count += 1;
    }
    Ok((name, count))
}
