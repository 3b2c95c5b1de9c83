//! End-to-end runs of the four cooperation levels over a measurement
//! sequence.
//!
//! | level | landmarks            | object estimator      | object vertices |
//! |-------|----------------------|-----------------------|-----------------|
//! | L0    | static + object points | none                | none            |
//! | L1    | static only          | CV EKF after SLAM     | none            |
//! | L2    | static only          | CV EKF                | CV, unit weight |
//! | L3    | static only          | CP/CV/CTRV IMM        | all models, IMM weights |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Se3Pose};
use crate::graph::{
    build_window, optimize, GraphConfig, GraphMode, InformationWeights, MapPointInput, ObjectFrameInput,
    ObjectObservation, ObjectState, ObjectTrackInput, SlammotGraph, SolverConfig, SolverReport, WindowFrame,
    WindowInput,
};
use crate::imm::{coast, imm_step, init_track, synthesize, ImmConfig, ImmTrack, Likelihood, Measurement, TransitionMatrix};
use crate::motion::{wrap_angle, FullState, ModelId, NoiseConfig};
use crate::sim::{MeasurementSequence, NoiseLevels, ObjectDetection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LevelId {
    L0,
    L1,
    L2,
    L3,
}

impl LevelId {
    pub const ALL: [LevelId; 4] = [LevelId::L0, LevelId::L1, LevelId::L2, LevelId::L3];

    pub fn name(self) -> &'static str {
        match self {
            LevelId::L0 => "L0",
            LevelId::L1 => "L1",
            LevelId::L2 => "L2",
            LevelId::L3 => "L3",
        }
    }

    pub fn tracks_objects(self) -> bool {
        self != LevelId::L0
    }
}

impl fmt::Display for LevelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LevelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L0" | "0" => Ok(LevelId::L0),
            "L1" | "1" => Ok(LevelId::L1),
            "L2" | "2" => Ok(LevelId::L2),
            "L3" | "3" => Ok(LevelId::L3),
            other => Err(Error::invalid(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Frames per optimization window, newest included.
    pub window: usize,
    /// Optimize every `stride` frames.
    pub stride: usize,
    pub noise: NoiseConfig,
    pub tau: f64,
    pub weight_floor: Option<f64>,
    pub likelihood: Likelihood,
    /// Replaces the `tau`-derived transition matrix of the L3 bank.
    pub transition: Option<Vec<Vec<f64>>>,
    /// Overrides the uniform weights of newly created L3 tracks.
    pub initial_weights: Option<[f64; 3]>,
    /// Frames an unmeasured track is predicted before it is dropped.
    pub coast_limit: usize,
    pub pixel_sigma: f64,
    /// Information weights; derived from `noise` and `pixel_sigma` when absent.
    pub information: Option<InformationWeights>,
    pub huber: Option<f64>,
    pub solver: SolverConfig,
    /// Minimum ray angle, in degrees, before a new landmark is triangulated.
    pub min_parallax_deg: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 10,
            stride: 1,
            noise: NoiseConfig::default(),
            tau: ImmConfig::DEFAULT_TAU,
            weight_floor: Some(ImmConfig::DEFAULT_FLOOR),
            likelihood: Likelihood::default(),
            transition: None,
            initial_weights: None,
            coast_limit: 2,
            pixel_sigma: 1.0,
            information: None,
            huber: None,
            solver: SolverConfig::default(),
            min_parallax_deg: 0.5,
        }
    }
}

impl PipelineConfig {
    /// Smallest standard deviation used when deriving weights from noise levels.
    pub const SIGMA_FLOOR: f64 = 1e-4;

    /// Filter noise and graph information taken from the simulator's noise
    /// levels (each σ floored at [`Self::SIGMA_FLOOR`]), everything else default.
    pub fn matched(levels: &NoiseLevels) -> Self {
        let f = |s: f64| s.max(Self::SIGMA_FLOOR);
        let mut cfg = Self::default();
        let (p, h) = (f(levels.object_position), f(levels.object_heading));
        cfg.noise.r = [p * p, p * p, h * h];
        cfg.pixel_sigma = f(levels.pixel);
        let mut info = InformationWeights::from_noise(&cfg.noise, cfg.pixel_sigma);
        let (r, t) = (f(levels.odometry_rotation), f(levels.odometry_translation));
        info.odometry = [1.0 / (r * r), 1.0 / (r * r), 1.0 / (r * r), 1.0 / (t * t), 1.0 / (t * t), 1.0 / (t * t)];
        cfg.information = Some(info);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid(format!("window must be at least 2, got {}", self.window)));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        if !(self.pixel_sigma > 0.0) {
            return Err(Error::invalid("pixel_sigma must be positive"));
        }
        self.noise.validate()?;
        self.imm_config(LevelId::L3)?.validate()
    }

    fn imm_config(&self, level: LevelId) -> Result<ImmConfig> {
        if level != LevelId::L3 {
            let mut cfg = ImmConfig::single(ModelId::Cv, self.noise.clone());
            cfg.likelihood = self.likelihood;
            return Ok(cfg);
        }
        let transition = match &self.transition {
            Some(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid("transition matrix must be square"));
                }
                TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))?
            }
            None => crate::imm::transition_matrix(self.tau)?,
        };
        Ok(ImmConfig {
            models: ModelId::ALL.to_vec(),
            transition,
            noise: self.noise.clone(),
            weight_floor: self.weight_floor,
            likelihood: self.likelihood,
        })
    }

    fn graph_config(&self, level: LevelId, seq: &MeasurementSequence) -> GraphConfig {
        GraphConfig {
            mode: if level == LevelId::L3 {
                GraphMode::MultiModel
            } else {
                GraphMode::SingleCv
            },
            intrinsics: seq.intrinsics,
            information: self
                .information
                .clone()
                .unwrap_or_else(|| InformationWeights::from_noise(&self.noise, self.pixel_sigma)),
            huber: self.huber,
            dt: seq.dt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEstimate {
    pub object_id: u64,
    pub state: FullState,
    /// Vertical world coordinate (the filter itself is planar).
    pub y: f64,
    pub weights: Vec<(ModelId, f64)>,
    /// False when the object was only predicted at this frame.
    pub measured: bool,
}

impl ObjectEstimate {
    pub fn weight_of(&self, model: ModelId) -> Option<f64> {
        self.weights.iter().find(|(m, _)| *m == model).map(|(_, w)| *w)
    }

    pub fn dominant_model(&self) -> Option<ModelId> {
        self.weights
            .iter()
            .fold(None, |acc: Option<(ModelId, f64)>, &(m, w)| match acc {
                Some((_, best)) if best >= w => acc,
                _ => Some((m, w)),
            })
            .map(|(m, _)| m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub frame: usize,
    pub pose: Se3Pose,
    pub objects: Vec<ObjectEstimate>,
    pub solver: Option<SolverReport>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateLog {
    pub level: LevelId,
    pub frames: Vec<FrameEstimate>,
}

impl EstimateLog {
    pub fn poses(&self) -> Vec<Se3Pose> {
        self.frames.iter().map(|f| f.pose).collect()
    }

    pub fn object_at(&self, frame: usize, id: u64) -> Option<&ObjectEstimate> {
        self.frames.get(frame)?.objects.iter().find(|o| o.object_id == id)
    }

    /// Last estimate of an object in the log.
    pub fn last_estimate(&self, id: u64) -> Option<&ObjectEstimate> {
        self.frames
            .iter()
            .rev()
            .find_map(|f| f.objects.iter().find(|o| o.object_id == id))
    }

    pub fn max_iterations(&self) -> usize {
        self.frames
            .iter()
            .filter_map(|f| f.solver.as_ref().map(|s| s.iterations))
            .max()
            .unwrap_or(0)
    }
}

/// Linear triangulation from two or more camera-from-world poses.
/// Returns `None` if the rays are degenerate or the point lands behind a camera.
pub fn triangulate(poses: &[Se3Pose], pixels: &[Vector2<f64>], k: &CameraIntrinsics) -> Option<Vector3<f64>> {
    if poses.len() < 2 || poses.len() != pixels.len() {
        return None;
    }
    let mut ata = Matrix4::zeros();
    for (pose, px) in poses.iter().zip(pixels) {
        let x = (px.x - k.cx) / k.fx;
        let y = (px.y - k.cy) / k.fy;
        let r = &pose.rotation;
        let t = &pose.translation;
        let row = |i: usize| nalgebra::RowVector4::new(r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]);
        let a1 = row(2) * x - row(0);
        let a2 = row(2) * y - row(1);
        ata += a1.transpose() * a1 + a2.transpose() * a2;
    }
    let eig = ata.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let h = eig.eigenvectors.column(imin);
    if h[3].abs() < 1e-12 {
        return None;
    }
    let p = Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
    if poses.iter().any(|pose| pose.transform(&p).z <= 0.1) {
        return None;
    }
    Some(p)
}

fn ray_angle(a: &Se3Pose, pa: &Vector2<f64>, b: &Se3Pose, pb: &Vector2<f64>, k: &CameraIntrinsics) -> f64 {
    let ra = a.rotation.transpose() * k.back_project(pa, 1.0);
    let rb = b.rotation.transpose() * k.back_project(pb, 1.0);
    ra.angle(&rb)
}

struct MapPoint {
    position: Option<Vector3<f64>>,
    observations: Vec<(usize, Vector2<f64>)>,
}

/// Per-frame object data retained while the frame is inside the window.
struct ObjectRecord {
    observation: ObjectObservation,
    weights: Vec<(ModelId, f64)>,
    states: Vec<ObjectState>,
}

struct Track {
    imm: ImmTrack,
    y: f64,
    missed: usize,
    records: BTreeMap<usize, ObjectRecord>,
}

impl Track {
    fn weights(&self) -> Vec<(ModelId, f64)> {
        self.imm.models().zip(self.imm.weights.iter().copied()).collect()
    }

    fn states(&self) -> Vec<ObjectState> {
        self.imm
            .estimates
            .iter()
            .map(|e| {
                let f = e.mean.lift();
                ObjectState::from_full(e.mean.model(), [f.x, self.y, f.z, f.theta, f.v, f.omega])
            })
            .collect()
    }

    fn estimate(&self, measured: bool) -> ObjectEstimate {
        let (state, _) = synthesize(&self.imm);
        ObjectEstimate {
            object_id: self.imm.object_id,
            state,
            y: self.y,
            weights: self.weights(),
            measured,
        }
    }
}

struct Runner<'a> {
    level: LevelId,
    cfg: &'a PipelineConfig,
    seq: &'a MeasurementSequence,
    imm: ImmConfig,
    graph_cfg: GraphConfig,
    poses: Vec<Se3Pose>,
    map: BTreeMap<u64, MapPoint>,
    tracks: BTreeMap<u64, Track>,
}

impl<'a> Runner<'a> {
    fn new(level: LevelId, seq: &'a MeasurementSequence, cfg: &'a PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if seq.frames.len() < 2 {
            return Err(Error::invalid("a run needs at least 2 frames"));
        }
        Ok(Self {
            level,
            cfg,
            seq,
            imm: cfg.imm_config(level)?,
            graph_cfg: cfg.graph_config(level, seq),
            poses: Vec::with_capacity(seq.frames.len()),
            map: BTreeMap::new(),
            tracks: BTreeMap::new(),
        })
    }

    fn window_start(&self, t: usize) -> usize {
        (t + 1).saturating_sub(self.cfg.window)
    }

    fn add_pixels(&mut self, t: usize) {
        let include_dynamic = self.level == LevelId::L0;
        for obs in &self.seq.frames[t].pixels {
            if obs.dynamic && !include_dynamic {
                continue;
            }
            self.map
                .entry(obs.landmark_id)
                .or_insert_with(|| MapPoint {
                    position: None,
                    observations: Vec::new(),
                })
                .observations
                .push((t, obs.pixel));
        }
    }

    fn triangulate_new(&mut self, t: usize) {
        let start = self.window_start(t);
        let k = self.seq.intrinsics;
        let min_angle = self.cfg.min_parallax_deg.to_radians();
        for mp in self.map.values_mut() {
            if mp.position.is_some() {
                continue;
            }
            let obs: Vec<_> = mp.observations.iter().filter(|(f, _)| *f >= start).collect();
            if obs.len() < 2 {
                continue;
            }
            let (f0, p0) = obs[0];
            let (f1, p1) = obs[obs.len() - 1];
            if ray_angle(&self.poses[*f0], p0, &self.poses[*f1], p1, &k) < min_angle {
                continue;
            }
            let poses: Vec<_> = obs.iter().map(|(f, _)| self.poses[*f]).collect();
            let pixels: Vec<_> = obs.iter().map(|(_, p)| *p).collect();
            mp.position = triangulate(&poses, &pixels, &k);
        }
        // Observations that have left the window are no longer needed.
        self.map.retain(|_, mp| {
            mp.observations.retain(|(f, _)| *f >= start);
            !mp.observations.is_empty()
        });
    }

    fn world_measurement(&self, det: &ObjectDetection, pose: &Se3Pose, frame: usize) -> (Measurement, f64) {
        let p = pose.inverse().transform(&det.position);
        let theta = wrap_angle(det.theta + pose.heading());
        (Measurement::new(det.object_id, frame, p.x, p.z, theta), p.y)
    }

    /// Runs the object filters on frame `t` using `pose` for the
    /// camera-to-world transform.
    fn filter_objects(&mut self, t: usize, pose: &Se3Pose) -> Result<()> {
        let dt = self.seq.dt;
        let mut seen = std::collections::BTreeSet::new();
        for det in &self.seq.frames[t].objects {
            if !seen.insert(det.object_id) {
                continue;
            }
            let (z, y) = self.world_measurement(det, pose, t);
            let observation = ObjectObservation {
                position: det.position,
                theta: det.theta,
            };
            let track = match self.tracks.remove(&det.object_id) {
                Some(mut tr) => {
                    let gap = (t - tr.imm.last_update) as f64;
                    let (imm, _, _) = imm_step(&tr.imm, &z, dt * gap, &self.imm)?;
                    tr.imm = imm;
                    tr.missed = 0;
                    tr
                }
                None => {
                    let mut imm = init_track(det.object_id, &z, &self.imm.models, &self.imm.noise);
                    if let (LevelId::L3, Some(w)) = (self.level, self.cfg.initial_weights) {
                        imm.weights = w.to_vec();
                    }
                    Track {
                        imm,
                        y,
                        missed: 0,
                        records: BTreeMap::new(),
                    }
                }
            };
            let mut track = track;
            if track.records.is_empty() {
                track.y = y;
            }
            let record = ObjectRecord {
                observation,
                weights: track.weights(),
                states: track.states(),
            };
            track.records.insert(t, record);
            self.tracks.insert(det.object_id, track);
        }
        let limit = self.cfg.coast_limit;
        let start = self.window_start(t);
        self.tracks.retain(|id, tr| {
            if seen.contains(id) {
                return true;
            }
            tr.missed += 1;
            tr.missed <= limit
        });
        for tr in self.tracks.values_mut() {
            tr.records.retain(|f, _| *f >= start);
            if tr.missed > 0 {
                tr.imm = coast(&tr.imm, dt * (t - tr.imm.last_update) as f64, &self.imm)?;
                tr.imm.last_update = t;
            }
        }
        Ok(())
    }

    fn build(&self, t: usize, with_objects: bool) -> Result<SlammotGraph> {
        let start = self.window_start(t);
        let frames: Vec<WindowFrame> = (start..=t)
            .map(|f| WindowFrame {
                frame: f,
                pose: self.poses[f],
                fixed: f == start,
            })
            .collect();
        let odometry = (start + 1..=t).map(|f| self.seq.frames[f].odometry).collect();
        let points = self
            .map
            .iter()
            .filter_map(|(id, mp)| {
                mp.position.map(|position| MapPointInput {
                    id: *id,
                    position,
                    observations: mp.observations.clone(),
                })
            })
            .collect();
        let objects = if with_objects {
            self.tracks
                .iter()
                .filter(|(_, tr)| !tr.records.is_empty())
                .map(|(id, tr)| ObjectTrackInput {
                    object_id: *id,
                    frames: tr
                        .records
                        .iter()
                        .map(|(f, r)| ObjectFrameInput {
                            frame: *f,
                            observation: r.observation,
                            weights: r.weights.clone(),
                            states: r.states.clone(),
                        })
                        .collect(),
                })
                .collect()
        } else {
            Vec::new()
        };
        build_window(
            &WindowInput {
                frames,
                odometry,
                points,
                objects,
            },
            &self.graph_cfg,
        )
    }

    fn write_back(&mut self, graph: &SlammotGraph, t: usize) {
        for p in &graph.poses {
            self.poses[p.frame] = p.pose;
        }
        for p in &graph.points {
            if let Some(mp) = self.map.get_mut(&p.id) {
                mp.position = Some(p.position);
            }
        }
        for v in &graph.objects {
            let Some(track) = self.tracks.get_mut(&v.object_id) else { continue };
            if let Some(rec) = track.records.get_mut(&v.frame) {
                if let Some(s) = rec.states.iter_mut().find(|s| s.model == v.model()) {
                    *s = v.state;
                }
            }
            if v.frame == t && track.missed == 0 {
                let [x, _, z, theta, vel, omega] = v.state.full();
                let full = FullState { x, z, theta, v: vel, omega };
                if let Some(est) = track.imm.estimates.iter_mut().find(|e| e.mean.model() == v.model()) {
                    est.mean = full.truncate(v.model());
                }
            }
        }
        // Vertical position: weight-averaged over the newest vertices.
        for track in self.tracks.values_mut() {
            let Some(rec) = track.records.get(&t) else { continue };
            let mut y = 0.0;
            let mut total = 0.0;
            for s in &rec.states {
                let w = rec.weights.iter().find(|(m, _)| *m == s.model).map_or(0.0, |(_, w)| *w);
                y += w * s.position().y;
                total += w;
            }
            if total > 0.0 {
                track.y = y / total;
            }
        }
    }

    fn run(mut self) -> Result<EstimateLog> {
        let mut out = Vec::with_capacity(self.seq.frames.len());
        let couple = matches!(self.level, LevelId::L2 | LevelId::L3);
        for t in 0..self.seq.frames.len() {
            let started = Instant::now();
            let predicted = if t == 0 {
                self.seq.initial_pose
            } else {
                self.seq.frames[t].odometry.compose(&self.poses[t - 1])
            };
            self.poses.push(predicted);
            self.add_pixels(t);
            self.triangulate_new(t);
            if couple {
                self.filter_objects(t, &predicted)?;
            }
            let mut report = None;
            if t > 0 && t % self.cfg.stride == 0 {
                let mut graph = self.build(t, couple)?;
                report = Some(optimize(&mut graph, &self.cfg.solver)?);
                self.write_back(&graph, t);
            }
            if self.level == LevelId::L1 {
                let pose = self.poses[t];
                self.filter_objects(t, &pose)?;
            }
            let objects = self.tracks.values().map(|tr| tr.estimate(tr.missed == 0)).collect();
            out.push(FrameEstimate {
                frame: t,
                pose: self.poses[t],
                objects,
                solver: report,
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
        Ok(EstimateLog {
            level: self.level,
            frames: out,
        })
    }
}

pub fn run_level(level: LevelId, seq: &MeasurementSequence, cfg: &PipelineConfig) -> Result<EstimateLog> {
    Runner::new(level, seq, cfg)?.run()
}

/// Pose-and-point bundle adjustment with object points treated as static.
pub fn run_level0(seq: &MeasurementSequence, cfg: &PipelineConfig) -> Result<EstimateLog> {
    run_level(LevelId::L0, seq, cfg)
}

/// Object points removed from SLAM; objects filtered afterwards with the
/// optimized pose and no feedback.
pub fn run_level1(seq: &MeasurementSequence, cfg: &PipelineConfig) -> Result<EstimateLog> {
    run_level(LevelId::L1, seq, cfg)
}

/// Coupled optimization with constant-velocity object vertices only.
pub fn run_level2(seq: &MeasurementSequence, cfg: &PipelineConfig) -> Result<EstimateLog> {
    run_level(LevelId::L2, seq, cfg)
}

/// Coupled optimization with IMM-weighted CP/CV/CTRV object vertices.
pub fn run_level3(seq: &MeasurementSequence, cfg: &PipelineConfig) -> Result<EstimateLog> {
    run_level(LevelId::L3, seq, cfg)
}
