//! Joint factor graph over ego poses, static map points and per-model
//! object states.
//!
//! A window of consecutive frames becomes one [`SlammotGraph`]:
//!
//! * a pose vertex per frame, tied to its successor by an odometry edge,
//! * a map-point vertex per landmark seen at least twice, with one
//!   reprojection edge per observation,
//! * for every tracked object and every motion model in use, one object
//!   vertex per observed frame. Consecutive vertices of the same model are
//!   linked by a system edge and (for CV/CTRV) a constant-motion edge, and
//!   each vertex carries a measurement edge to its frame's pose.
//!
//! Object edges are scaled by the model weight of their `(object, frame)`
//! pair, so the objective is `Σ odo + Σ repr + Σ_i Σ_d w^d e^d`. The
//! single-model mode builds only CV vertices with unit weights.

mod residuals;
mod solver;

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use residuals::*;
pub use solver::{cost_gradient, optimize, SolverConfig, SolverReport};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Se3Pose};
use crate::motion::{ModelId, NoiseConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// CP, CV and CTRV vertices with IMM weights on the object edges.
    #[default]
    MultiModel,
    /// CV vertices only, every object edge with unit weight.
    SingleCv,
}

impl GraphMode {
    pub fn models(self) -> &'static [ModelId] {
        match self {
            GraphMode::MultiModel => &ModelId::ALL,
            GraphMode::SingleCv => &[ModelId::Cv],
        }
    }
}

/// Diagonal information (inverse variance) per residual kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationWeights {
    pub reprojection: f64,
    /// Rotation components first, then translation.
    pub odometry: [f64; 6],
    pub object_measurement: [f64; 4],
    /// `(x, y, z, θ)` information of the system edge, per model.
    pub system: BTreeMap<ModelId, [f64; 4]>,
    /// `(v, ω)` information of the constant-motion edge, per model.
    pub constant_motion: BTreeMap<ModelId, [f64; 2]>,
}

impl InformationWeights {
    /// Reprojection `1/σ_px²`, fixed odometry weights, and object edges
    /// derived from the filter's measurement and process noise.
    pub fn from_noise(noise: &NoiseConfig, pixel_sigma: f64) -> Self {
        let r = &noise.r;
        let mut system = BTreeMap::new();
        let mut constant_motion = BTreeMap::new();
        for m in ModelId::ALL {
            let q = noise.q_diag(m);
            system.insert(m, [1.0 / q[0], 1.0 / q[0], 1.0 / q[1], 1.0 / q[2]]);
            let mut cm = [0.0; 2];
            for (i, v) in q[3..].iter().enumerate() {
                cm[i] = 1.0 / v;
            }
            constant_motion.insert(m, cm);
        }
        Self {
            reprojection: 1.0 / (pixel_sigma * pixel_sigma),
            odometry: [100.0, 100.0, 100.0, 25.0, 25.0, 25.0],
            object_measurement: [1.0 / r[0], 1.0 / r[0], 1.0 / r[1], 1.0 / r[2]],
            system,
            constant_motion,
        }
    }

    /// Every information entry set to one, the literal unweighted objective.
    pub fn unit() -> Self {
        let mut s = Self::from_noise(&NoiseConfig::default(), 1.0);
        s.odometry = [1.0; 6];
        s.object_measurement = [1.0; 4];
        s.system.values_mut().for_each(|v| *v = [1.0; 4]);
        s.constant_motion.values_mut().for_each(|v| *v = [1.0; 2]);
        s
    }
}

impl Default for InformationWeights {
    fn default() -> Self {
        Self::from_noise(&NoiseConfig::default(), 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub mode: GraphMode,
    pub intrinsics: CameraIntrinsics,
    pub information: InformationWeights,
    /// Huber threshold in whitened units; `None` keeps pure least squares.
    pub huber: Option<f64>,
    /// Frame interval in seconds.
    pub dt: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            mode: GraphMode::MultiModel,
            intrinsics: CameraIntrinsics::default(),
            information: InformationWeights::default(),
            huber: None,
            dt: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseVertex {
    pub frame: usize,
    pub pose: Se3Pose,
    pub fixed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointVertex {
    pub id: u64,
    pub position: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectVertex {
    pub object_id: u64,
    pub frame: usize,
    pub state: ObjectState,
}

impl ObjectVertex {
    pub fn model(&self) -> ModelId {
        self.state.model
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EdgeKind {
    Reprojection {
        pose: usize,
        point: usize,
        pixel: Vector2<f64>,
    },
    Odometry {
        from: usize,
        to: usize,
        relative: Se3Pose,
    },
    ObjectMeasurement {
        pose: usize,
        object: usize,
        observation: ObjectObservation,
    },
    System {
        from: usize,
        to: usize,
        dt: f64,
    },
    ConstantMotion {
        from: usize,
        to: usize,
    },
}

impl EdgeKind {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeKind::Reprojection { .. } => "reprojection",
            EdgeKind::Odometry { .. } => "odometry",
            EdgeKind::ObjectMeasurement { .. } => "object_measurement",
            EdgeKind::System { .. } => "system",
            EdgeKind::ConstantMotion { .. } => "constant_motion",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    /// Model weight for object edges, one otherwise.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlammotGraph {
    pub poses: Vec<PoseVertex>,
    pub points: Vec<PointVertex>,
    pub objects: Vec<ObjectVertex>,
    pub edges: Vec<Edge>,
    pub config: GraphConfig,
    /// Reprojection edges left out because the point was behind the camera.
    pub dropped_edges: usize,
}

// ---------------------------------------------------------------------------
// Window input
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct WindowFrame {
    pub frame: usize,
    pub pose: Se3Pose,
    pub fixed: bool,
}

#[derive(Clone, Debug)]
pub struct MapPointInput {
    pub id: u64,
    pub position: Vector3<f64>,
    pub observations: Vec<(usize, Vector2<f64>)>,
}

#[derive(Clone, Debug)]
pub struct ObjectFrameInput {
    pub frame: usize,
    pub observation: ObjectObservation,
    /// IMM weight per model at this frame.
    pub weights: Vec<(ModelId, f64)>,
    /// Initial vertex value per model.
    pub states: Vec<ObjectState>,
}

#[derive(Clone, Debug)]
pub struct ObjectTrackInput {
    pub object_id: u64,
    pub frames: Vec<ObjectFrameInput>,
}

#[derive(Clone, Debug, Default)]
pub struct WindowInput {
    pub frames: Vec<WindowFrame>,
    /// `odometry[k]` is the relative motion from `frames[k]` to `frames[k + 1]`.
    pub odometry: Vec<Se3Pose>,
    pub points: Vec<MapPointInput>,
    pub objects: Vec<ObjectTrackInput>,
}

/// Assembles the graph of one window.
pub fn build_window(input: &WindowInput, cfg: &GraphConfig) -> Result<SlammotGraph> {
    if input.frames.len() < 2 {
        return Err(Error::invalid(format!(
            "window needs at least 2 frames, got {}",
            input.frames.len()
        )));
    }
    if input.odometry.len() + 1 != input.frames.len() {
        return Err(Error::invalid("odometry count must be one less than frame count"));
    }
    if input.frames.windows(2).any(|w| w[1].frame <= w[0].frame) {
        return Err(Error::invalid("window frames must be strictly increasing"));
    }
    let mut graph = SlammotGraph {
        poses: Vec::with_capacity(input.frames.len()),
        points: Vec::new(),
        objects: Vec::new(),
        edges: Vec::new(),
        config: cfg.clone(),
        dropped_edges: 0,
    };
    let mut pose_index = BTreeMap::new();
    for f in &input.frames {
        pose_index.insert(f.frame, graph.poses.len());
        graph.poses.push(PoseVertex {
            frame: f.frame,
            pose: f.pose,
            fixed: f.fixed,
        });
    }
    for (k, rel) in input.odometry.iter().enumerate() {
        graph.edges.push(Edge {
            kind: EdgeKind::Odometry {
                from: k,
                to: k + 1,
                relative: *rel,
            },
            weight: 1.0,
        });
    }

    for mp in &input.points {
        let mut seen = std::collections::BTreeSet::new();
        let usable: Vec<(usize, Vector2<f64>)> = mp
            .observations
            .iter()
            .filter_map(|(f, px)| pose_index.get(f).map(|&i| (i, *px)))
            .filter(|(i, _)| seen.insert(*i))
            .collect();
        if usable.len() < 2 {
            continue;
        }
        let in_front: Vec<_> = usable
            .iter()
            .filter(|(i, _)| graph.poses[*i].pose.transform(&mp.position).z > 0.0)
            .copied()
            .collect();
        graph.dropped_edges += usable.len() - in_front.len();
        if in_front.len() < 2 {
            graph.dropped_edges += in_front.len();
            continue;
        }
        let point = graph.points.len();
        graph.points.push(PointVertex {
            id: mp.id,
            position: mp.position,
        });
        for (pose, pixel) in in_front {
            graph.edges.push(Edge {
                kind: EdgeKind::Reprojection { pose, point, pixel },
                weight: 1.0,
            });
        }
    }
    if graph.dropped_edges > 0 {
        log::debug!("dropped {} reprojection edges behind the camera", graph.dropped_edges);
    }

    for track in &input.objects {
        for &model in cfg.mode.models() {
            let mut prev: Option<(usize, usize)> = None;
            for of in &track.frames {
                let Some(&pose) = pose_index.get(&of.frame) else {
                    continue;
                };
                let weight = match cfg.mode {
                    GraphMode::SingleCv => 1.0,
                    GraphMode::MultiModel => {
                        let total: f64 = of.weights.iter().map(|(_, w)| w).sum();
                        if (total - 1.0).abs() > 1e-9 {
                            return Err(Error::invalid(format!(
                                "model weights of object {} at frame {} sum to {total}",
                                track.object_id, of.frame
                            )));
                        }
                        of.weights
                            .iter()
                            .find(|(m, _)| *m == model)
                            .map(|(_, w)| *w)
                            .unwrap_or(0.0)
                    }
                };
                let state = of
                    .states
                    .iter()
                    .find(|s| s.model == model)
                    .copied()
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "object {} at frame {} has no {model} initial state",
                            track.object_id, of.frame
                        ))
                    })?;
                let v = graph.objects.len();
                graph.objects.push(ObjectVertex {
                    object_id: track.object_id,
                    frame: of.frame,
                    state,
                });
                graph.edges.push(Edge {
                    kind: EdgeKind::ObjectMeasurement {
                        pose,
                        object: v,
                        observation: of.observation,
                    },
                    weight,
                });
                if let Some((pv, pframe)) = prev {
                    // The edge belongs to the earlier frame's model term.
                    let prev_weight = graph.edges.iter().rev().find_map(|e| match e.kind {
                        EdgeKind::ObjectMeasurement { object, .. } if object == pv => Some(e.weight),
                        _ => None,
                    });
                    let w = prev_weight.unwrap_or(weight);
                    let dt = cfg.dt * (of.frame - pframe) as f64;
                    graph.edges.push(Edge {
                        kind: EdgeKind::System { from: pv, to: v, dt },
                        weight: w,
                    });
                    if model != ModelId::Cp {
                        graph.edges.push(Edge {
                            kind: EdgeKind::ConstantMotion { from: pv, to: v },
                            weight: w,
                        });
                    }
                }
                prev = Some((v, of.frame));
            }
        }
    }
    Ok(graph)
}

/// Residual of one edge in information-weighted form, plus the diagonal
/// information used to whiten it.
pub(crate) struct Linearized {
    pub residual: DVector<f64>,
    pub info: DVector<f64>,
    /// (vertex, Jacobian) pairs.
    pub blocks: Vec<(VertexRef, DMatrix<f64>)>,
}

/// Vertex addressed by an edge Jacobian block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexRef {
    Pose(usize),
    Point(usize),
    Object(usize),
}

impl SlammotGraph {
    pub fn pose_of_frame(&self, frame: usize) -> Option<&Se3Pose> {
        self.poses.iter().find(|p| p.frame == frame).map(|p| &p.pose)
    }

    pub fn object_vertex(&self, object_id: u64, frame: usize, model: ModelId) -> Option<&ObjectVertex> {
        self.objects
            .iter()
            .find(|o| o.object_id == object_id && o.frame == frame && o.model() == model)
    }

    pub fn count_edges(&self, name: &str) -> usize {
        self.edges.iter().filter(|e| e.kind.name() == name).count()
    }

    fn edge_info(&self, edge: &Edge) -> DVector<f64> {
        let info = &self.config.information;
        match &edge.kind {
            EdgeKind::Reprojection { .. } => DVector::from_element(2, info.reprojection),
            EdgeKind::Odometry { .. } => DVector::from_column_slice(&info.odometry),
            EdgeKind::ObjectMeasurement { .. } => DVector::from_column_slice(&info.object_measurement),
            EdgeKind::System { from, .. } => {
                DVector::from_column_slice(&info.system[&self.objects[*from].model()])
            }
            EdgeKind::ConstantMotion { from, .. } => {
                let m = self.objects[*from].model();
                DVector::from_column_slice(&info.constant_motion[&m][..m.velocity_dim()])
            }
        }
    }

    /// Raw residual vector of an edge at the current vertex values.
    pub fn edge_residual(&self, edge: &Edge) -> Result<DVector<f64>> {
        let k = &self.config.intrinsics;
        Ok(match &edge.kind {
            EdgeKind::Reprojection { pose, point, pixel } => {
                let r = residual_reprojection(&self.poses[*pose].pose, &self.points[*point].position, pixel, k)?;
                DVector::from_column_slice(r.as_slice())
            }
            EdgeKind::Odometry { from, to, relative } => {
                let r = residual_odometry(&self.poses[*from].pose, &self.poses[*to].pose, relative);
                DVector::from_column_slice(r.as_slice())
            }
            EdgeKind::ObjectMeasurement {
                pose,
                object,
                observation,
            } => {
                let r = residual_object_measurement(
                    &self.poses[*pose].pose,
                    &self.objects[*object].state,
                    observation,
                );
                DVector::from_column_slice(r.as_slice())
            }
            EdgeKind::System { from, to, dt } => {
                let r = residual_object_system(&self.objects[*from].state, &self.objects[*to].state, *dt)?;
                DVector::from_column_slice(r.as_slice())
            }
            EdgeKind::ConstantMotion { from, to } => {
                residual_constant_motion(&self.objects[*from].state, &self.objects[*to].state)?
            }
        })
    }

    pub(crate) fn linearize(&self, edge: &Edge) -> Result<Linearized> {
        let residual = self.edge_residual(edge)?;
        let info = self.edge_info(edge);
        let blocks = match &edge.kind {
            EdgeKind::Reprojection { pose, point, .. } => {
                let (jp, jm) = reprojection_jacobians(
                    &self.poses[*pose].pose,
                    &self.points[*point].position,
                    &self.config.intrinsics,
                )?;
                vec![
                    (VertexRef::Pose(*pose), DMatrix::from_column_slice(2, 6, jp.as_slice())),
                    (VertexRef::Point(*point), DMatrix::from_column_slice(2, 3, jm.as_slice())),
                ]
            }
            EdgeKind::Odometry { from, to, relative } => {
                let (ja, jb) = odometry_jacobians(&self.poses[*from].pose, &self.poses[*to].pose, relative);
                vec![
                    (VertexRef::Pose(*from), DMatrix::from_column_slice(6, 6, ja.as_slice())),
                    (VertexRef::Pose(*to), DMatrix::from_column_slice(6, 6, jb.as_slice())),
                ]
            }
            EdgeKind::ObjectMeasurement { pose, object, .. } => {
                let (jp, jo) =
                    object_measurement_jacobians(&self.poses[*pose].pose, &self.objects[*object].state);
                vec![
                    (VertexRef::Pose(*pose), DMatrix::from_column_slice(4, 6, jp.as_slice())),
                    (VertexRef::Object(*object), jo),
                ]
            }
            EdgeKind::System { from, to, dt } => {
                let (ja, jb) = system_jacobians(&self.objects[*from].state, &self.objects[*to].state, *dt);
                vec![(VertexRef::Object(*from), ja), (VertexRef::Object(*to), jb)]
            }
            EdgeKind::ConstantMotion { from, to } => {
                let (ja, jb) = constant_motion_jacobians(&self.objects[*from].state);
                vec![(VertexRef::Object(*from), ja), (VertexRef::Object(*to), jb)]
            }
        };
        Ok(Linearized {
            residual,
            info,
            blocks,
        })
    }

    /// Analytic Jacobian blocks of an edge residual, one per vertex.
    pub fn edge_jacobians(&self, edge: &Edge) -> Result<Vec<(VertexRef, DMatrix<f64>)>> {
        Ok(self.linearize(edge)?.blocks)
    }

    /// Squared whitened norm passed through the robust kernel, and the
    /// matching IRLS scale.
    pub(crate) fn robust(&self, chi2: f64) -> (f64, f64) {
        match self.config.huber {
            Some(delta) if chi2 > delta * delta => {
                let r = chi2.sqrt();
                (2.0 * delta * r - delta * delta, delta / r)
            }
            _ => (chi2, 1.0),
        }
    }

    /// Cost contribution of one edge.
    pub fn edge_cost(&self, edge: &Edge) -> Result<f64> {
        let r = self.edge_residual(edge)?;
        let info = self.edge_info(edge);
        let chi2: f64 = r.iter().zip(info.iter()).map(|(e, w)| w * e * e).sum();
        Ok(edge.weight * self.robust(chi2).0)
    }

    /// Weighted sum of squared residual norms over every edge.
    pub fn total_cost(&self) -> Result<f64> {
        let mut total = 0.0;
        for e in &self.edges {
            if e.weight == 0.0 {
                continue;
            }
            total += self.edge_cost(e)?;
        }
        Ok(total)
    }

    /// Writes one line per vertex and edge.
    pub fn dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (i, p) in self.poses.iter().enumerate() {
            let v = p.pose.to_row_major();
            write!(out, "POSE {i} frame={} fixed={}", p.frame, p.fixed)?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                out,
                "POINT {i} id={} {} {} {}",
                p.id, p.position.x, p.position.y, p.position.z
            )?;
        }
        for (i, o) in self.objects.iter().enumerate() {
            write!(out, "OBJECT {i} id={} frame={} model={}", o.object_id, o.frame, o.model())?;
            for x in o.state.as_slice() {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        for e in &self.edges {
            let (a, b) = match &e.kind {
                EdgeKind::Reprojection { pose, point, .. } => (*pose, *point),
                EdgeKind::Odometry { from, to, .. }
                | EdgeKind::System { from, to, .. }
                | EdgeKind::ConstantMotion { from, to } => (*from, *to),
                EdgeKind::ObjectMeasurement { pose, object, .. } => (*pose, *object),
            };
            writeln!(out, "EDGE {} {a} {b} weight={}", e.kind.name(), e.weight)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
