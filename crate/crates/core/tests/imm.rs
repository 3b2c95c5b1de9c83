mod common;

use nalgebra::{DMatrix, Matrix4, Vector3, Vector4};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use slammot::imm::*;
use slammot::motion::{self, ModelId, ModelState, NoiseConfig};

fn est(model: ModelId, values: &[f64], diag: f64) -> ModelEstimate {
    ModelEstimate {
        mean: ModelState::new(model, values).unwrap(),
        covariance: DMatrix::identity(model.dim(), model.dim()) * diag,
    }
}

fn bank() -> ImmTrack {
    ImmTrack {
        object_id: 1,
        estimates: vec![
            est(ModelId::Cp, &[1.0, 2.0, 0.3], 0.5),
            est(ModelId::Cv, &[1.2, 2.1, 0.35, 2.0], 0.7),
            est(ModelId::Ctrv, &[0.9, 1.8, 0.25, 2.5, 0.1], 0.9),
        ],
        weights: vec![0.5, 0.3, 0.2],
        last_update: 0,
    }
}

fn lifted(e: &ModelEstimate) -> ([f64; 5], [[f64; 5]; 5]) {
    let mut x = [0.0; 5];
    x[..e.mean.dim()].copy_from_slice(e.mean.as_slice());
    let mut p = [[0.0; 5]; 5];
    for i in 0..e.mean.dim() {
        for j in 0..e.mean.dim() {
            p[i][j] = e.covariance[(i, j)];
        }
    }
    (x, p)
}

/// Plain-array mixture of weighted Gaussians; headings here stay far from the wrap.
fn mixture(probs: &[f64], parts: &[([f64; 5], [[f64; 5]; 5])]) -> ([f64; 5], [[f64; 5]; 5]) {
    let mut mean = [0.0; 5];
    for (p, (x, _)) in probs.iter().zip(parts) {
        for i in 0..5 {
            mean[i] += p * x[i];
        }
    }
    let mut cov = [[0.0; 5]; 5];
    for (p, (x, c)) in probs.iter().zip(parts) {
        for i in 0..5 {
            for j in 0..5 {
                cov[i][j] += p * (c[i][j] + (x[i] - mean[i]) * (x[j] - mean[j]));
            }
        }
    }
    (mean, cov)
}

#[test]
fn merge_matches_direct_formula() {
    let t = bank();
    let tau = 0.1;
    let pi = transition_matrix(tau).unwrap();
    let merged = merge(&t, &pi, None);
    let parts: Vec<_> = t.estimates.iter().map(lifted).collect();
    for d in 0..3 {
        let raw: Vec<f64> = (0..3)
            .map(|c| if c == d { 1.0 - 2.0 * tau } else { tau } * t.weights[c])
            .collect();
        let total: f64 = raw.iter().sum();
        assert!((merged.weights[d] - total).abs() < 1e-15);
        let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let (mean, cov) = mixture(&probs, &parts);
        let e = &merged.estimates[d];
        let dim = e.mean.dim();
        for i in 0..dim {
            assert!((e.mean.as_slice()[i] - mean[i]).abs() < 1e-12, "model {d} comp {i}");
            for j in 0..dim {
                assert!((e.covariance[(i, j)] - cov[i][j]).abs() < 1e-12, "model {d} cov {i},{j}");
            }
        }
    }
}

#[test]
fn synthesize_matches_direct_formula() {
    let t = bank();
    let (state, cov) = synthesize(&t);
    let parts: Vec<_> = t.estimates.iter().map(lifted).collect();
    let (mean, expected) = mixture(&t.weights, &parts);
    let got = state.to_array();
    for i in 0..5 {
        assert!((got[i] - mean[i]).abs() < 1e-12);
        for j in 0..5 {
            assert!((cov[(i, j)] - expected[i][j]).abs() < 1e-12);
        }
    }
    // The spread term makes the fused covariance at least the weighted mean.
    let mean_trace: f64 = t.weights.iter().zip(&t.estimates).map(|(w, e)| w * e.covariance.trace()).sum();
    assert!(cov.trace() >= mean_trace);
}

#[test]
fn predict_covariance_uses_finite_difference_jacobian() {
    let noise = NoiseConfig::default();
    let e = est(ModelId::Ctrv, &[3.0, -1.0, 0.7, 4.0, 0.3], 0.2);
    let dt = 0.1;
    let h = 1e-6;
    let mut a = DMatrix::zeros(5, 5);
    for k in 0..5 {
        let shift = |s: f64| {
            let mut v = e.mean.as_slice().to_vec();
            v[k] += s;
            motion::propagate(&ModelState::new(ModelId::Ctrv, &v).unwrap(), dt).unwrap().to_vector()
        };
        a.set_column(k, &((shift(h) - shift(-h)) / (2.0 * h)));
    }
    let expected = &a * &e.covariance * a.transpose() + motion::process_noise(ModelId::Ctrv, &noise);
    let got = ekf_predict(&e, dt, &noise).unwrap();
    assert!((got.covariance - expected).amax() < 1e-8);
}

#[test]
fn cv_only_bank_is_a_plain_ekf() {
    let noise = NoiseConfig::default();
    let cfg = ImmConfig::single(ModelId::Cv, noise.clone());
    let mut r = common::rng(3);
    let dt = 0.1;
    let meas = |r: &mut rand_chacha::ChaCha8Rng, k: usize| {
        let t = k as f64 * dt;
        Measurement::new(
            1,
            k,
            5.0 * t + r.random_range(-0.5..0.5),
            2.0 + r.random_range(-0.5..0.5),
            r.random_range(-0.1..0.1),
        )
    };
    let first = meas(&mut r, 0);
    let mut track = init_track(1, &first, &cfg.models, &noise);
    let mut oracle = common::CvFilter {
        x: Vector4::new(first.x, first.z, first.theta, 0.0),
        p: Matrix4::from_diagonal(&Vector4::new(noise.init_cov[0], noise.init_cov[1], noise.init_cov[2], noise.init_cov[3])),
    };
    for k in 1..=100 {
        let z = meas(&mut r, k);
        let (next, _, _) = imm_step(&track, &z, dt, &cfg).unwrap();
        track = next;
        oracle.step(Vector3::new(z.x, z.z, z.theta), dt, &noise);
        let got = &track.estimates[0];
        for i in 0..4 {
            assert!((got.mean.as_slice()[i] - oracle.x[i]).abs() < 1e-12, "step {k} comp {i}");
        }
        assert_eq!(track.weights, vec![1.0]);
    }
}

#[test]
fn bank_order_does_not_change_the_fused_estimate() {
    let noise = NoiseConfig::default();
    let mut cfg = ImmConfig::standard(noise.clone());
    let first = Measurement::new(1, 0, 0.0, 10.0, 0.2);
    let mut a = init_track(1, &first, &cfg.models, &noise);
    let perm = [2usize, 0, 1];
    let mut cfg_b = cfg.clone();
    cfg_b.models = perm.iter().map(|&i| cfg.models[i]).collect();
    let mut b = init_track(1, &first, &cfg_b.models, &noise);
    cfg.transition = transition_matrix(0.05).unwrap();
    cfg_b.transition = transition_matrix(0.05).unwrap();
    for k in 1..30 {
        let t = k as f64 * 0.1;
        let z = Measurement::new(1, k, 4.0 * t * 0.2f64.cos(), 10.0 + 4.0 * t * 0.2f64.sin(), 0.2 + 0.01 * k as f64);
        let (na, sa, pa) = imm_step(&a, &z, 0.1, &cfg).unwrap();
        let (nb, sb, pb) = imm_step(&b, &z, 0.1, &cfg_b).unwrap();
        for (x, y) in sa.to_array().iter().zip(sb.to_array()) {
            assert!((x - y).abs() < 1e-9, "step {k}");
        }
        assert!((pa - pb).amax() < 1e-9);
        for (i, &p) in perm.iter().enumerate() {
            assert!((na.weights[p] - nb.weights[i]).abs() < 1e-12);
        }
        a = na;
        b = nb;
    }
}

#[test]
fn zero_noise_constant_velocity_converges() {
    let mut noise = NoiseConfig::default();
    noise.r = [1e-6, 1e-6, 1e-8];
    let cfg = ImmConfig::single(ModelId::Cv, noise.clone());
    let (v, theta, dt) = (6.0, 0.4f64, 0.1);
    let at = |k: usize| {
        let t = k as f64 * dt;
        Measurement::new(1, k, 1.0 + v * t * theta.cos(), 3.0 + v * t * theta.sin(), theta)
    };
    let mut track = init_track(1, &at(0), &cfg.models, &noise);
    let mut state = None;
    for k in 1..=10 {
        let (next, s, _) = imm_step(&track, &at(k), dt, &cfg).unwrap();
        track = next;
        state = Some(s);
    }
    let s = state.unwrap();
    assert!((s.v - v).abs() < 0.05, "v = {}", s.v);
}

#[test]
fn stationary_target_selects_constant_position() {
    let noise = NoiseConfig::default();
    let cfg = ImmConfig::standard(noise.clone());
    let mut r = common::rng(9);
    let n = Normal::new(0.0, 0.5).unwrap();
    let h = Normal::new(0.0, 0.1).unwrap();
    let mut z = |k| Measurement::new(2, k, 4.0 + n.sample(&mut r), 12.0 + n.sample(&mut r), 1.0 + h.sample(&mut r));
    let mut track = init_track(2, &z(0), &cfg.models, &noise);
    for k in 1..=50 {
        track = imm_step(&track, &z(k), 0.1, &cfg).unwrap().0;
    }
    assert_eq!(track.dominant_model(), ModelId::Cp, "{:?}", track.weights);
}

fn arb_measurement() -> impl Strategy<Value = (f64, f64, f64)> {
    (-50.0..50.0f64, -50.0..50.0f64, -3.2..3.2f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn imm_step_keeps_weights_and_covariances_valid(
        zs in prop::collection::vec(arb_measurement(), 2..8),
        tau in 0.0..0.3f64,
        dt in 0.02..0.5f64,
    ) {
        let noise = NoiseConfig::default();
        let mut cfg = ImmConfig::standard(noise.clone());
        cfg.transition = transition_matrix(tau).unwrap();
        let first = Measurement::new(0, 0, zs[0].0, zs[0].1, zs[0].2);
        let mut track = init_track(0, &first, &cfg.models, &noise);
        for (k, (x, z, th)) in zs.iter().enumerate().skip(1) {
            let (next, _, cov) = imm_step(&track, &Measurement::new(0, k, *x, *z, *th), dt, &cfg).unwrap();
            prop_assert!((next.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((&cov - cov.transpose()).amax() < 1e-12);
            prop_assert!(cov.clone().symmetric_eigenvalues().min() >= -1e-10);
            for e in &next.estimates {
                prop_assert!((&e.covariance - e.covariance.transpose()).amax() < 1e-12);
            }
            track = next;
        }
    }
}
