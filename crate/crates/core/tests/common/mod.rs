#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Matrix4, Vector2, Vector3, Vector4, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slammot::geometry::{CameraIntrinsics, Se3Pose};
use slammot::graph::*;
use slammot::motion::{wrap_angle, ModelId, NoiseConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_rotation_pose(rng: &mut ChaCha8Rng, center: Vector3<f64>) -> Se3Pose {
    let heading = rng.random_range(-0.6..0.6);
    let base = Se3Pose::camera_from_planar(center, heading);
    let tilt = Vector6::new(
        rng.random_range(-0.05..0.05),
        0.0,
        rng.random_range(-0.05..0.05),
        0.0,
        0.0,
        0.0,
    );
    Se3Pose::exp(&tilt).compose(&base)
}

/// A random window with every edge kind and residuals away from zero.
pub fn random_graph(seed: u64, mode: GraphMode) -> SlammotGraph {
    let mut r = rng(seed);
    let k = CameraIntrinsics::default();
    let n = 4;
    let frames: Vec<WindowFrame> = (0..n)
        .map(|i| {
            let center = Vector3::new(r.random_range(-1.0..1.0), 0.0, i as f64);
            WindowFrame {
                frame: i,
                pose: small_rotation_pose(&mut r, center),
                fixed: i == 0,
            }
        })
        .collect();
    let odometry = (1..n)
        .map(|i| {
            let noise = Vector6::from_fn(|_, _| r.random_range(-0.05..0.05));
            Se3Pose::exp(&noise).compose(&frames[i].pose.compose(&frames[i - 1].pose.inverse()))
        })
        .collect();
    let points = (0..6)
        .map(|j| {
            let p = Vector3::new(r.random_range(-4.0..4.0), r.random_range(-2.0..2.0), r.random_range(12.0..30.0));
            MapPointInput {
                id: j,
                position: p,
                observations: frames
                    .iter()
                    .map(|f| {
                        let px = k.project(&f.pose.transform(&p)).unwrap();
                        (f.frame, px + Vector2::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)))
                    })
                    .collect(),
            }
        })
        .collect();
    let objects = (0..2)
        .map(|id| ObjectTrackInput {
            object_id: id,
            frames: (0..n)
                .map(|f| {
                    let w: [f64; 3] = [r.random_range(0.1..1.0), r.random_range(0.1..1.0), r.random_range(0.1..1.0)];
                    let total: f64 = w.iter().sum();
                    let states = ModelId::ALL
                        .iter()
                        .map(|&m| {
                            let full = [
                                r.random_range(-5.0..5.0),
                                r.random_range(0.0..1.5),
                                r.random_range(10.0..25.0),
                                r.random_range(-3.0..3.0),
                                r.random_range(-8.0..8.0),
                                r.random_range(-0.8..0.8),
                            ];
                            ObjectState::from_full(m, full)
                        })
                        .collect();
                    ObjectFrameInput {
                        frame: f,
                        observation: ObjectObservation {
                            position: Vector3::new(r.random_range(-5.0..5.0), r.random_range(0.0..1.5), r.random_range(8.0..25.0)),
                            theta: r.random_range(-3.0..3.0),
                        },
                        weights: ModelId::ALL.iter().copied().zip(w.iter().map(|v| v / total)).collect(),
                        states,
                    }
                })
                .collect(),
        })
        .collect();
    let cfg = GraphConfig {
        mode,
        ..Default::default()
    };
    build_window(&WindowInput { frames, odometry, points, objects }, &cfg).unwrap()
}

pub fn vertex_dim(g: &SlammotGraph, v: VertexRef) -> usize {
    match v {
        VertexRef::Pose(_) => 6,
        VertexRef::Point(_) => 3,
        VertexRef::Object(i) => g.objects[i].state.dim(),
    }
}

/// Copy of `g` with component `k` of vertex `v` moved by `h`.
pub fn perturbed(g: &SlammotGraph, v: VertexRef, k: usize, h: f64) -> SlammotGraph {
    let mut out = g.clone();
    match v {
        VertexRef::Pose(i) => {
            let mut d = Vector6::zeros();
            d[k] = h;
            out.poses[i].pose = Se3Pose::exp(&d).compose(&g.poses[i].pose);
        }
        VertexRef::Point(i) => out.points[i].position[k] += h,
        VertexRef::Object(i) => {
            let mut d = vec![0.0; g.objects[i].state.dim()];
            d[k] = h;
            out.objects[i].state.apply(&d);
        }
    }
    out
}

/// Residual difference that treats heading entries as angles.
pub fn residual_diff(edge: &Edge, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut d = a - b;
    let angle_row = match edge.kind {
        EdgeKind::ObjectMeasurement { .. } | EdgeKind::System { .. } => Some(3),
        _ => None,
    };
    if let Some(i) = angle_row {
        d[i] = wrap_angle(d[i]);
    }
    d
}

/// Central finite-difference Jacobian of an edge residual.
pub fn numeric_jacobian(g: &SlammotGraph, edge_index: usize, v: VertexRef, h: f64) -> DMatrix<f64> {
    let edge = &g.edges[edge_index];
    let dim = vertex_dim(g, v);
    let rows = g.edge_residual(edge).unwrap().len();
    let mut j = DMatrix::zeros(rows, dim);
    for k in 0..dim {
        let plus = perturbed(g, v, k, h);
        let minus = perturbed(g, v, k, -h);
        let rp = plus.edge_residual(&plus.edges[edge_index]).unwrap();
        let rm = minus.edge_residual(&minus.edges[edge_index]).unwrap();
        j.set_column(k, &(residual_diff(edge, &rp, &rm) / (2.0 * h)));
    }
    j
}

/// Largest entrywise error relative to `max(1, |entry|)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Worst Jacobian mismatch over every edge of `g`, grouped by edge kind.
pub fn jacobian_errors(g: &SlammotGraph) -> std::collections::BTreeMap<&'static str, f64> {
    let mut out = std::collections::BTreeMap::new();
    for (i, e) in g.edges.iter().enumerate() {
        for (v, analytic) in g.edge_jacobians(e).unwrap() {
            let numeric = numeric_jacobian(g, i, v, 1e-6);
            let err = relative_error(&analytic, &numeric);
            let slot = out.entry(e.kind.name()).or_insert(0.0f64);
            *slot = slot.max(err);
        }
    }
    out
}

use slammot::sim::{GroundTruth, MeasurementSequence};

/// Window over frames `start..end` initialized at ground truth. Object edges
/// get weight one on the scripted model of each frame.
pub fn truth_window(truth: &GroundTruth, seq: &MeasurementSequence, start: usize, end: usize, mode: GraphMode) -> WindowInput {
    let frames: Vec<WindowFrame> = (start..end)
        .map(|f| WindowFrame {
            frame: f,
            pose: truth.poses[f],
            fixed: f == start,
        })
        .collect();
    let odometry = (start + 1..end).map(|f| seq.frames[f].odometry).collect();
    let mut points = std::collections::BTreeMap::new();
    for f in start..end {
        for p in &seq.frames[f].pixels {
            if p.dynamic {
                continue;
            }
            points
                .entry(p.landmark_id)
                .or_insert_with(|| MapPointInput {
                    id: p.landmark_id,
                    position: truth.landmarks[p.landmark_id as usize].position,
                    observations: vec![],
                })
                .observations
                .push((f, p.pixel));
        }
    }
    let objects = truth
        .objects
        .iter()
        .map(|o| ObjectTrackInput {
            object_id: o.id,
            frames: (start..end)
                .filter_map(|f| {
                    let det = seq.frames[f].objects.iter().find(|d| d.object_id == o.id)?;
                    let (s, label) = o.state_at(f)?;
                    let full = [s.x, o.y, s.z, s.theta, s.v, s.omega];
                    Some(ObjectFrameInput {
                        frame: f,
                        observation: ObjectObservation {
                            position: det.position,
                            theta: det.theta,
                        },
                        weights: ModelId::ALL.iter().map(|&m| (m, if m == label { 1.0 } else { 0.0 })).collect(),
                        states: ModelId::ALL.iter().map(|&m| ObjectState::from_full(m, full)).collect(),
                    })
                })
                .collect(),
        })
        .filter(|t: &ObjectTrackInput| !t.frames.is_empty())
        .collect();
    let _ = mode;
    WindowInput {
        frames,
        odometry,
        points: points.into_values().collect(),
        objects,
    }
}

/// Textbook CV filter written with fixed-size matrices.
pub struct CvFilter {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

impl CvFilter {
    pub fn step(&mut self, z: Vector3<f64>, dt: f64, n: &NoiseConfig) {
        let (s, c) = self.x[2].sin_cos();
        let v = self.x[3];
        self.x = Vector4::new(self.x[0] + v * c * dt, self.x[1] + v * s * dt, self.x[2], v);
        let mut a = Matrix4::identity();
        a[(0, 2)] = -v * s * dt;
        a[(0, 3)] = c * dt;
        a[(1, 2)] = v * c * dt;
        a[(1, 3)] = s * dt;
        self.p = a * self.p * a.transpose() + Matrix4::from_diagonal(&Vector4::from(n.q_cv));
        self.p = (self.p + self.p.transpose()) * 0.5;
        let h = Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let sm = h * self.p * h.transpose() + Matrix3::from_diagonal(&Vector3::from(n.r));
        let k = self.p * h.transpose() * sm.try_inverse().unwrap();
        let mut nu = z - h * self.x;
        nu[2] = wrap_angle(nu[2]);
        self.x += k * nu;
        self.x[2] = wrap_angle(self.x[2]);
        self.p = (Matrix4::identity() - k * h) * self.p;
        self.p = (self.p + self.p.transpose()) * 0.5;
    }
}
