//! Synthetic world: scripted ego motion, static landmarks, scripted
//! objects, and the noisy per-frame measurements derived from them.
//!
//! World axes are right-handed with `y` pointing down; all motion happens
//! in the `x`–`z` plane. The ego camera looks along
//! `(−sin φ, 0, cos φ)` for heading `φ`, so an object driving alongside the
//! ego has heading `φ + π/2`.

use nalgebra::{Vector2, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Se3Pose};
use crate::motion::{propagate, wrap_angle, FullState, ModelId, ModelState};

/// Offset separating object surface point ids from static landmark ids.
pub const OBJECT_POINT_ID_BASE: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSegment {
    pub frames: usize,
    /// Meters per second along the camera's forward axis.
    pub speed: f64,
    pub yaw_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoScript {
    pub initial_position: [f64; 3],
    pub initial_heading: f64,
    pub segments: Vec<EgoSegment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSegment {
    pub model: ModelId,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub omega: f64,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectScript {
    pub id: u64,
    #[serde(default)]
    pub start_frame: usize,
    /// `(x, y, z, θ)` at `start_frame`.
    pub initial: [f64; 4],
    pub segments: Vec<ObjectSegment>,
}

/// Landmarks are scattered around the ego path: each one is anchored to a
/// random frame and offset along that frame's forward and lateral axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkConfig {
    pub count: usize,
    pub forward: [f64; 2],
    /// Absolute lateral offset range; the side is drawn at random.
    pub lateral: [f64; 2],
    pub height: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    pub pixel: f64,
    pub object_position: f64,
    pub object_heading: f64,
    pub odometry_rotation: f64,
    pub odometry_translation: f64,
    /// 5% of object measurements get five times the nominal σ.
    #[serde(default)]
    pub heavy_tail: bool,
}

impl NoiseLevels {
    pub fn zero() -> Self {
        Self {
            pixel: 0.0,
            object_position: 0.0,
            object_heading: 0.0,
            odometry_rotation: 0.0,
            odometry_translation: 0.0,
            heavy_tail: false,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pixel: self.pixel * factor,
            object_position: self.object_position * factor,
            object_heading: self.object_heading * factor,
            odometry_rotation: self.odometry_rotation * factor,
            odometry_translation: self.odometry_translation * factor,
            heavy_tail: self.heavy_tail,
        }
    }
}

impl Default for NoiseLevels {
    fn default() -> Self {
        Self {
            pixel: 1.0,
            object_position: 0.5,
            object_heading: 0.1,
            odometry_rotation: 0.002,
            odometry_translation: 0.02,
            heavy_tail: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub frames: usize,
    pub dt: f64,
    pub intrinsics: CameraIntrinsics,
    pub image_size: [u32; 2],
    pub ego: EgoScript,
    pub landmarks: LandmarkConfig,
    pub objects: Vec<ObjectScript>,
    /// Trackable points attached to each object body (seen by Level 0 as landmarks).
    #[serde(default)]
    pub object_points_per_object: usize,
    pub noise: NoiseLevels,
    /// Half-open frame range `[start, end)` covering the scripted pattern transitions.
    #[serde(default)]
    pub transition_segment: Option<[usize; 2]>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::invalid(format!("{field}: {why}")));
        if self.frames < 2 {
            return bad("frames", format!("need at least 2 frames, got {}", self.frames));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        self.intrinsics.validate()?;
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return bad("image_size", "must be non-zero".into());
        }
        let ego_frames: usize = self.ego.segments.iter().map(|s| s.frames).sum();
        if ego_frames != self.frames {
            return bad(
                "ego.segments",
                format!("durations sum to {ego_frames}, expected {}", self.frames),
            );
        }
        let n = &self.noise;
        for (name, v) in [
            ("noise.pixel", n.pixel),
            ("noise.object_position", n.object_position),
            ("noise.object_heading", n.object_heading),
            ("noise.odometry_rotation", n.odometry_rotation),
            ("noise.odometry_translation", n.odometry_translation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, format!("must be non-negative, got {v}"));
            }
        }
        let l = &self.landmarks;
        for (name, r) in [
            ("landmarks.forward", l.forward),
            ("landmarks.lateral", l.lateral),
            ("landmarks.height", l.height),
        ] {
            if !(r[0] <= r[1]) {
                return bad(name, format!("range [{}, {}] is empty", r[0], r[1]));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return bad("objects.id", format!("duplicate object id {}", o.id));
            }
            let span: usize = o.segments.iter().map(|s| s.frames).sum();
            if span == 0 || o.start_frame + span > self.frames {
                return bad(
                    "objects.segments",
                    format!(
                        "object {} spans frames {}..{} outside 0..{}",
                        o.id,
                        o.start_frame,
                        o.start_frame + span,
                        self.frames
                    ),
                );
            }
            if o.segments.iter().any(|s| s.model == ModelId::Cp && (s.v != 0.0 || s.omega != 0.0)) {
                return bad("objects.segments", format!("object {} has a CP segment with motion", o.id));
            }
            if o.segments.iter().any(|s| s.model == ModelId::Cv && s.omega != 0.0) {
                return bad("objects.segments", format!("object {} has a CV segment with turn rate", o.id));
            }
        }
        if let Some([a, b]) = self.transition_segment {
            if a >= b || b > self.frames {
                return bad("transition_segment", format!("[{a}, {b}) is not inside 0..{}", self.frames));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landmark {
    pub id: u64,
    pub position: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectTruth {
    pub id: u64,
    pub y: f64,
    pub start_frame: usize,
    pub states: Vec<FullState>,
    pub models: Vec<ModelId>,
    /// Surface points in the body frame (forward, down, left-handed lateral).
    pub surface_points: Vec<Vector3<f64>>,
}

impl ObjectTruth {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.states.len()
    }

    pub fn is_active(&self, frame: usize) -> bool {
        frame >= self.start_frame && frame < self.end_frame()
    }

    pub fn state_at(&self, frame: usize) -> Option<(&FullState, ModelId)> {
        self.is_active(frame).then(|| {
            let k = frame - self.start_frame;
            (&self.states[k], self.models[k])
        })
    }

    pub fn position_at(&self, frame: usize) -> Option<Vector3<f64>> {
        self.state_at(frame).map(|(s, _)| Vector3::new(s.x, self.y, s.z))
    }

    /// World position of surface point `k` at `frame`.
    pub fn surface_point_at(&self, frame: usize, k: usize) -> Option<Vector3<f64>> {
        let (s, _) = self.state_at(frame)?;
        let b = self.surface_points[k];
        let (sn, c) = s.theta.sin_cos();
        Some(Vector3::new(
            s.x + b.x * c - b.z * sn,
            self.y + b.y,
            s.z + b.x * sn + b.z * c,
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub poses: Vec<Se3Pose>,
    pub headings: Vec<f64>,
    pub landmarks: Vec<Landmark>,
    pub objects: Vec<ObjectTruth>,
}

impl GroundTruth {
    pub fn frames(&self) -> usize {
        self.poses.len()
    }

    pub fn object(&self, id: u64) -> Option<&ObjectTruth> {
        self.objects.iter().find(|o| o.id == id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelObservation {
    pub landmark_id: u64,
    pub pixel: Vector2<f64>,
    /// True when the point sits on a moving object (ground-truth segmentation).
    pub dynamic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectDetection {
    pub object_id: u64,
    /// Camera-frame position.
    pub position: Vector3<f64>,
    /// Heading relative to the camera heading.
    pub theta: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMeasurements {
    pub frame: usize,
    pub pixels: Vec<PixelObservation>,
    /// Relative motion from the previous frame (`T_t = odometry · T_{t−1}`);
    /// identity at frame 0.
    pub odometry: Se3Pose,
    pub objects: Vec<ObjectDetection>,
}

/// Everything a pipeline consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSequence {
    pub dt: f64,
    pub intrinsics: CameraIntrinsics,
    pub image_size: [u32; 2],
    /// Known starting pose shared by every level.
    pub initial_pose: Se3Pose,
    pub frames: Vec<FrameMeasurements>,
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Builds the ground truth of a scenario; landmark placement uses `cfg.seed`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut poses = Vec::with_capacity(cfg.frames);
    let mut headings = Vec::with_capacity(cfg.frames);
    let [px, py, pz] = cfg.ego.initial_position;
    let mut pos = Vector3::new(px, py, pz);
    let mut phi = wrap_angle(cfg.ego.initial_heading);
    let mut seg = cfg.ego.segments.iter().flat_map(|s| std::iter::repeat_n(s, s.frames));
    for _ in 0..cfg.frames {
        poses.push(Se3Pose::camera_from_planar(pos, phi));
        headings.push(phi);
        let s = seg.next().expect("segment durations validated");
        let mid = phi + 0.5 * s.yaw_rate * cfg.dt;
        pos += Vector3::new(-mid.sin(), 0.0, mid.cos()) * (s.speed * cfg.dt);
        phi = wrap_angle(phi + s.yaw_rate * cfg.dt);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = &cfg.landmarks;
    let landmarks = (0..l.count)
        .map(|i| {
            let anchor = rng.random_range(0..cfg.frames);
            let fwd = uniform(&mut rng, l.forward);
            let lat = uniform(&mut rng, l.lateral) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let h = uniform(&mut rng, l.height);
            let r_wc = poses[anchor].rotation.transpose();
            let c = poses[anchor].center();
            Landmark {
                id: i as u64,
                position: c + r_wc * Vector3::new(lat, h, fwd),
            }
        })
        .collect();

    let mut objects = Vec::with_capacity(cfg.objects.len());
    for script in &cfg.objects {
        let [x, y, z, theta] = script.initial;
        let mut states = Vec::new();
        let mut models = Vec::new();
        let mut cur = (x, z, wrap_angle(theta));
        for s in &script.segments {
            for _ in 0..s.frames {
                let st = ModelState::ctrv(cur.0, cur.1, cur.2, s.v, s.omega);
                states.push(FullState {
                    x: cur.0,
                    z: cur.1,
                    theta: cur.2,
                    v: s.v,
                    omega: s.omega,
                });
                models.push(s.model);
                let model_state = st.lift().truncate(s.model);
                let next = propagate(&model_state, cfg.dt)?;
                cur = (next.x(), next.z(), next.theta());
            }
        }
        let n = cfg.object_points_per_object;
        let surface_points = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                Vector3::new(2.0 * a.cos(), -0.5 + 0.4 * ((k % 3) as f64), 0.9 * a.sin())
            })
            .collect();
        objects.push(ObjectTruth {
            id: script.id,
            y,
            start_frame: script.start_frame,
            states,
            models,
            surface_points,
        });
    }
    Ok(GroundTruth {
        poses,
        headings,
        landmarks,
        objects,
    })
}

fn in_image(px: &Vector2<f64>, size: [u32; 2]) -> bool {
    px.x >= 0.0 && px.y >= 0.0 && px.x < size[0] as f64 && px.y < size[1] as f64
}

/// Minimum depth for anything to count as visible.
const MIN_DEPTH: f64 = 0.5;
/// Objects further away than this are not detected.
const MAX_OBJECT_DEPTH: f64 = 80.0;

fn draw(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("σ validated").sample(rng)
}

/// Noisy measurements of frame `t`, drawing noise from `rng`.
pub fn observe_frame(
    truth: &GroundTruth,
    t: usize,
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FrameMeasurements> {
    if t >= truth.frames() {
        return Err(Error::invalid(format!("frame {t} outside 0..{}", truth.frames())));
    }
    let pose = &truth.poses[t];
    let k = &cfg.intrinsics;
    let n = &cfg.noise;
    let mut pixels = Vec::new();
    let mut observe_point = |id: u64, p: &Vector3<f64>, dynamic: bool, rng: &mut ChaCha8Rng| {
        let pc = pose.transform(p);
        if pc.z <= MIN_DEPTH {
            return;
        }
        let Ok(px) = k.project(&pc) else { return };
        if !in_image(&px, cfg.image_size) {
            return;
        }
        let noisy = px + Vector2::new(draw(rng, n.pixel), draw(rng, n.pixel));
        if in_image(&noisy, cfg.image_size) {
            pixels.push(PixelObservation {
                landmark_id: id,
                pixel: noisy,
                dynamic,
            });
        }
    };
    for lm in &truth.landmarks {
        observe_point(lm.id, &lm.position, false, rng);
    }
    for obj in &truth.objects {
        for k in 0..obj.surface_points.len() {
            if let Some(p) = obj.surface_point_at(t, k) {
                let id = OBJECT_POINT_ID_BASE + obj.id * 1000 + k as u64;
                observe_point(id, &p, true, rng);
            }
        }
    }

    let odometry = if t == 0 {
        Se3Pose::identity()
    } else {
        let rel = pose.compose(&truth.poses[t - 1].inverse());
        let xi = Vector6::new(
            draw(rng, n.odometry_rotation),
            draw(rng, n.odometry_rotation),
            draw(rng, n.odometry_rotation),
            draw(rng, n.odometry_translation),
            draw(rng, n.odometry_translation),
            draw(rng, n.odometry_translation),
        );
        Se3Pose::exp(&xi).compose(&rel)
    };

    let mut objects = Vec::new();
    for obj in &truth.objects {
        let Some(p) = obj.position_at(t) else { continue };
        let (s, _) = obj.state_at(t).unwrap();
        let pc = pose.transform(&p);
        if pc.z <= MIN_DEPTH || pc.z > MAX_OBJECT_DEPTH {
            continue;
        }
        match k.project(&pc) {
            Ok(px) if in_image(&px, cfg.image_size) => {}
            _ => continue,
        }
        let scale = if n.heavy_tail && rng.random_bool(0.05) { 5.0 } else { 1.0 };
        let sp = n.object_position * scale;
        let sh = n.object_heading * scale;
        objects.push(ObjectDetection {
            object_id: obj.id,
            position: pc + Vector3::new(draw(rng, sp), draw(rng, sp), draw(rng, sp)),
            theta: wrap_angle(s.theta - truth.headings[t] + draw(rng, sh)),
            score: 1.0,
        });
    }
    Ok(FrameMeasurements {
        frame: t,
        pixels,
        odometry,
        objects,
    })
}

/// Ground truth plus the full measurement sequence. Measurement noise uses
/// a stream independent from the landmark layout.
pub fn simulate(cfg: &ScenarioConfig) -> Result<(GroundTruth, MeasurementSequence)> {
    let truth = generate_scenario(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let frames = (0..truth.frames())
        .map(|t| observe_frame(&truth, t, cfg, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let seq = MeasurementSequence {
        dt: cfg.dt,
        intrinsics: cfg.intrinsics,
        image_size: cfg.image_size,
        initial_pose: truth.poses[0],
        frames,
    };
    Ok((truth, seq))
}

fn segment(model: ModelId, v: f64, omega: f64, frames: usize) -> ObjectSegment {
    ObjectSegment { model, v, omega, frames }
}

fn object(id: u64, initial: [f64; 4], segments: Vec<ObjectSegment>) -> ObjectScript {
    ObjectScript {
        id,
        start_frame: 0,
        initial,
        segments,
    }
}

const FRAMES: usize = 60;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

fn base(name: &str, objects: Vec<ObjectScript>, transition: [usize; 2]) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        frames: FRAMES,
        dt: 0.1,
        intrinsics: CameraIntrinsics::default(),
        image_size: [1242, 375],
        ego: EgoScript {
            initial_position: [0.0, 0.0, 0.0],
            initial_heading: 0.0,
            segments: vec![
                EgoSegment {
                    frames: 25,
                    speed: 5.0,
                    yaw_rate: 0.0,
                },
                EgoSegment {
                    frames: 20,
                    speed: 5.0,
                    yaw_rate: 0.05,
                },
                EgoSegment {
                    frames: 15,
                    speed: 5.0,
                    yaw_rate: 0.0,
                },
            ],
        },
        landmarks: LandmarkConfig {
            count: 250,
            forward: [6.0, 40.0],
            lateral: [3.0, 15.0],
            height: [-3.0, 1.5],
        },
        objects,
        object_points_per_object: 6,
        noise: NoiseLevels::default(),
        transition_segment: Some(transition),
        seed: 1,
    }
}

/// The named scenarios shipped with the library.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    use ModelId::{Cp, Ctrv, Cv};
    let mostly_static = base(
        "mostly-static",
        vec![
            object(1, [-4.0, 0.8, 30.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
            object(2, [4.5, 0.8, 35.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
            object(3, [-4.0, 0.8, 42.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
            object(4, [4.5, 0.8, 48.0, -HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
            object(
                5,
                [1.5, 0.8, 25.0, HALF_PI],
                vec![segment(Cv, 6.0, 0.0, 30), segment(Cp, 0.0, 0.0, 30)],
            ),
        ],
        [20, 40],
    );
    let oncoming = base(
        "oncoming",
        vec![
            object(1, [-3.0, 0.8, 70.0, -HALF_PI], vec![segment(Cv, 8.0, 0.0, FRAMES)]),
            object(
                2,
                [-6.0, 0.8, 60.0, -HALF_PI],
                vec![segment(Cv, 5.0, 0.0, 25), segment(Cp, 0.0, 0.0, 35)],
            ),
            object(3, [4.0, 0.8, 40.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
        ],
        [20, 35],
    );
    let mixed = base(
        "mixed",
        vec![
            object(1, [-4.0, 0.8, 30.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
            object(2, [4.5, 0.8, 40.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
            object(3, [2.0, 0.8, 20.0, HALF_PI], vec![segment(Cv, 6.0, 0.0, FRAMES)]),
            object(4, [6.0, 0.8, 28.0, HALF_PI], vec![segment(Ctrv, 5.0, 0.3, FRAMES)]),
            object(
                5,
                [1.5, 0.8, 35.0, HALF_PI],
                vec![segment(Cp, 0.0, 0.0, 25), segment(Cv, 4.0, 0.0, 35)],
            ),
        ],
        [20, 40],
    );
    let highway = ScenarioConfig {
        ego: EgoScript {
            initial_position: [0.0, 0.0, 0.0],
            initial_heading: 0.0,
            segments: vec![EgoSegment {
                frames: FRAMES,
                speed: 20.0,
                yaw_rate: 0.0,
            }],
        },
        landmarks: LandmarkConfig {
            count: 400,
            forward: [8.0, 60.0],
            lateral: [6.0, 20.0],
            height: [-4.0, 1.5],
        },
        ..base(
            "highway",
            vec![
                object(1, [-3.5, 0.8, 25.0, HALF_PI], vec![segment(Cv, 22.0, 0.0, FRAMES)]),
                object(2, [3.5, 0.8, 30.0, HALF_PI], vec![segment(Cv, 18.0, 0.0, FRAMES)]),
                object(
                    3,
                    [0.0, 0.8, 35.0, HALF_PI],
                    vec![
                        segment(Cv, 20.0, 0.0, 20),
                        segment(Ctrv, 20.0, 0.15, 15),
                        segment(Cv, 20.0, 0.0, 25),
                    ],
                ),
                object(4, [-7.0, 0.8, 45.0, HALF_PI], vec![segment(Cv, 24.0, 0.0, FRAMES)]),
                object(5, [7.0, 0.8, 20.0, HALF_PI], vec![segment(Ctrv, 21.0, -0.05, FRAMES)]),
            ],
            [20, 35],
        )
    };
    let transition = base(
        "transition",
        vec![
            object(
                1,
                [2.0, 0.8, 22.0, HALF_PI],
                vec![segment(Cv, 9.0, 0.0, 20), segment(Cp, 0.0, 0.0, 40)],
            ),
            object(
                2,
                [-2.5, 0.8, 35.0, HALF_PI],
                vec![segment(Cp, 0.0, 0.0, 20), segment(Cv, 8.0, 0.0, 40)],
            ),
            object(
                3,
                [3.0, 0.8, 28.0, HALF_PI],
                vec![
                    segment(Cv, 5.0, 0.0, 20),
                    segment(Ctrv, 5.0, 0.5, 15),
                    segment(Cv, 5.0, 0.0, 25),
                ],
            ),
            object(4, [-4.5, 0.8, 40.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
        ],
        [20, 40],
    );
    let diagnostic = ScenarioConfig {
        noise: NoiseLevels::zero(),
        object_points_per_object: 0,
        ..base(
            "diagnostic",
            vec![
                object(1, [-4.0, 0.8, 30.0, HALF_PI], vec![segment(Cp, 0.0, 0.0, FRAMES)]),
                object(
                    2,
                    [2.0, 0.8, 20.0, HALF_PI],
                    vec![segment(Cv, 6.0, 0.0, 30), segment(Cp, 0.0, 0.0, 30)],
                ),
                object(3, [4.0, 0.8, 25.0, HALF_PI], vec![segment(Ctrv, 5.0, 0.2, FRAMES)]),
            ],
            [20, 40],
        )
    };
    vec![mostly_static, oncoming, mixed, highway, transition, diagnostic]
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
