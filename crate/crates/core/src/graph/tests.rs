use nalgebra::{Vector2, Vector3};

use super::*;
use crate::geometry::Se3Pose;

fn frames(n: usize) -> Vec<WindowFrame> {
    (0..n)
        .map(|i| WindowFrame {
            frame: i,
            pose: Se3Pose::camera_from_planar(Vector3::new(0.0, 0.0, i as f64), 0.0),
            fixed: i == 0,
        })
        .collect()
}

fn odometry(f: &[WindowFrame]) -> Vec<Se3Pose> {
    f.windows(2).map(|w| w[1].pose.compose(&w[0].pose.inverse())).collect()
}

fn object_track(n: usize, weights: [f64; 3]) -> ObjectTrackInput {
    ObjectTrackInput {
        object_id: 7,
        frames: (0..n)
            .map(|i| {
                let full = [2.0 + 0.2 * i as f64, 1.0, 15.0, 0.0, 2.0, 0.0];
                ObjectFrameInput {
                    frame: i,
                    observation: ObjectObservation {
                        position: Vector3::new(full[0], full[1], full[2] - i as f64),
                        theta: 0.0,
                    },
                    weights: ModelId::ALL.iter().copied().zip(weights).collect(),
                    states: ModelId::ALL.iter().map(|&m| ObjectState::from_full(m, full)).collect(),
                }
            })
            .collect(),
    }
}

#[test]
fn counting_points_only() {
    let f = frames(2);
    let k = CameraIntrinsics::default();
    let points = (0..10)
        .map(|j| {
            let p = Vector3::new(j as f64 - 5.0, 0.5, 20.0);
            MapPointInput {
                id: j,
                position: p,
                observations: f.iter().map(|w| (w.frame, k.project(&w.pose.transform(&p)).unwrap())).collect(),
            }
        })
        .collect();
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        points,
        objects: vec![],
    };
    let g = build_window(&input, &GraphConfig::default()).unwrap();
    assert_eq!(g.poses.len(), 2);
    assert_eq!(g.points.len(), 10);
    assert_eq!(g.count_edges("reprojection"), 20);
    assert_eq!(g.count_edges("odometry"), 1);
}

#[test]
fn counting_objects_per_mode() {
    let f = frames(3);
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        points: vec![],
        objects: vec![object_track(3, [0.2, 0.5, 0.3])],
    };
    let g = build_window(&input, &GraphConfig::default()).unwrap();
    assert_eq!(g.objects.len(), 9);
    assert_eq!(g.count_edges("object_measurement"), 9);
    assert_eq!(g.count_edges("system"), 6);
    assert_eq!(g.count_edges("constant_motion"), 4);

    let cfg = GraphConfig {
        mode: GraphMode::SingleCv,
        ..Default::default()
    };
    let g = build_window(&input, &cfg).unwrap();
    assert_eq!(g.objects.len(), 3);
    assert_eq!(g.count_edges("object_measurement"), 3);
    assert_eq!(g.count_edges("system"), 2);
    assert_eq!(g.count_edges("constant_motion"), 2);
    assert!(g.edges.iter().all(|e| e.weight == 1.0));
}

#[test]
fn window_validation() {
    let f = frames(1);
    let input = WindowInput {
        frames: f,
        ..Default::default()
    };
    assert!(build_window(&input, &GraphConfig::default()).is_err());
    let f = frames(3);
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        points: vec![],
        objects: vec![object_track(3, [0.2, 0.5, 0.2])],
    };
    assert!(build_window(&input, &GraphConfig::default()).is_err());
}

#[test]
fn single_points_and_points_behind_are_skipped() {
    let f = frames(2);
    let k = CameraIntrinsics::default();
    let p = Vector3::new(0.0, 0.0, 10.0);
    let px = k.project(&f[0].pose.transform(&p)).unwrap();
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        points: vec![
            MapPointInput {
                id: 0,
                position: p,
                observations: vec![(0, px)],
            },
            MapPointInput {
                id: 1,
                position: Vector3::new(0.0, 0.0, -5.0),
                observations: vec![(0, px), (1, px)],
            },
        ],
        objects: vec![],
    };
    let g = build_window(&input, &GraphConfig::default()).unwrap();
    assert!(g.points.is_empty());
    assert_eq!(g.dropped_edges, 2);
}

#[test]
fn cost_examples() {
    let f = frames(2);
    let k = CameraIntrinsics::default();
    let p = Vector3::new(1.0, 0.5, 12.0);
    let mut obs: Vec<(usize, Vector2<f64>)> =
        f.iter().map(|w| (w.frame, k.project(&w.pose.transform(&p)).unwrap())).collect();
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f.clone(),
        points: vec![MapPointInput {
            id: 0,
            position: p,
            observations: obs.clone(),
        }],
        objects: vec![],
    };
    let cfg = GraphConfig {
        information: InformationWeights::unit(),
        ..Default::default()
    };
    let g = build_window(&input, &cfg).unwrap();
    assert!(g.total_cost().unwrap() < 1e-20);

    obs[1].1 += Vector2::new(3.0, 4.0);
    let input = WindowInput {
        points: vec![MapPointInput {
            id: 0,
            position: p,
            observations: obs,
        }],
        ..input
    };
    let g = build_window(&input, &cfg).unwrap();
    assert!((g.total_cost().unwrap() - 25.0).abs() < 1e-9);
}

#[test]
fn pinned_cv_weights_match_single_model_cost() {
    let f = frames(3);
    let mut track = object_track(3, [0.0, 1.0, 0.0]);
    for (i, of) in track.frames.iter_mut().enumerate() {
        of.observation.position.x += 0.1 * (i as f64 - 1.0);
        of.observation.theta = 0.05 * i as f64;
    }
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        points: vec![],
        objects: vec![track],
    };
    let l3 = build_window(&input, &GraphConfig::default()).unwrap();
    let l2 = build_window(
        &input,
        &GraphConfig {
            mode: GraphMode::SingleCv,
            ..Default::default()
        },
    )
    .unwrap();
    let (a, b) = (l3.total_cost().unwrap(), l2.total_cost().unwrap());
    assert!(a > 0.0);
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn optimize_requires_gauge() {
    let mut f = frames(2);
    f[0].fixed = false;
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        ..Default::default()
    };
    let mut g = build_window(&input, &GraphConfig::default()).unwrap();
    assert!(optimize(&mut g, &SolverConfig::default()).is_err());
}

#[test]
fn dump_lists_every_element() {
    let f = frames(3);
    let input = WindowInput {
        odometry: odometry(&f),
        frames: f,
        points: vec![],
        objects: vec![object_track(3, [0.2, 0.5, 0.3])],
    };
    let g = build_window(&input, &GraphConfig::default()).unwrap();
    let mut buf = Vec::new();
    g.dump(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), g.poses.len() + g.objects.len() + g.edges.len());
    assert_eq!(text.lines().filter(|l| l.starts_with("EDGE system")).count(), 6);
}
