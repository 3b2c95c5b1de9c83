//! Planar object motion models.
//!
//! Objects move in the horizontal `x`–`z` plane of a right-handed frame whose
//! `y` axis points down. Three models are supported:
//!
//! | model  | state                    | dim |
//! |--------|--------------------------|-----|
//! | `Cp`   | `[x, z, θ]`              | 3   |
//! | `Cv`   | `[x, z, θ, v]`           | 4   |
//! | `Ctrv` | `[x, z, θ, v, ω]`        | 5   |
//!
//! `θ` is the heading in the `x`–`z` plane (`x += v cos θ`, `z += v sin θ`),
//! `v` the speed along it and `ω` the turn rate. The CTRV update integrates
//! the position with the mid-interval heading `θ + ωΔt/2`, so there is no
//! `1/ω` singularity to special-case.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`. Angles already in range are returned untouched.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelId {
    Cp,
    Cv,
    Ctrv,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::Cp, ModelId::Cv, ModelId::Ctrv];

    pub const fn dim(self) -> usize {
        match self {
            ModelId::Cp => 3,
            ModelId::Cv => 4,
            ModelId::Ctrv => 5,
        }
    }

    /// Number of velocity components (`v`, `ω`) carried by the model.
    pub const fn velocity_dim(self) -> usize {
        self.dim() - 3
    }

    pub const fn name(self) -> &'static str {
        match self {
            ModelId::Cp => "CP",
            ModelId::Cv => "CV",
            ModelId::Ctrv => "CTRV",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CP" => Ok(ModelId::Cp),
            "CV" => Ok(ModelId::Cv),
            "CTRV" => Ok(ModelId::Ctrv),
            other => Err(Error::invalid(format!("unknown motion model `{other}`"))),
        }
    }
}

/// Object state under one motion model. Components past the model
/// dimension are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    model: ModelId,
    values: [f64; 5],
}

impl ModelState {
    /// Builds a state from exactly `model.dim()` components; the heading is wrapped.
    pub fn new(model: ModelId, components: &[f64]) -> Result<Self> {
        if components.len() != model.dim() {
            return Err(Error::invalid(format!(
                "{model} state needs {} components, got {}",
                model.dim(),
                components.len()
            )));
        }
        let mut values = [0.0; 5];
        values[..components.len()].copy_from_slice(components);
        values[2] = wrap_angle(values[2]);
        Ok(Self { model, values })
    }

    pub fn cp(x: f64, z: f64, theta: f64) -> Self {
        Self::new(ModelId::Cp, &[x, z, theta]).unwrap()
    }

    pub fn cv(x: f64, z: f64, theta: f64, v: f64) -> Self {
        Self::new(ModelId::Cv, &[x, z, theta, v]).unwrap()
    }

    pub fn ctrv(x: f64, z: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self::new(ModelId::Ctrv, &[x, z, theta, v, omega]).unwrap()
    }

    pub fn from_vector(model: ModelId, v: &DVector<f64>) -> Result<Self> {
        Self::new(model, v.as_slice())
    }

    pub fn model(&self) -> ModelId {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.model.dim()]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.as_slice())
    }

    pub fn x(&self) -> f64 {
        self.values[0]
    }

    pub fn z(&self) -> f64 {
        self.values[1]
    }

    pub fn theta(&self) -> f64 {
        self.values[2]
    }

    /// Speed; zero for CP.
    pub fn v(&self) -> f64 {
        self.values[3]
    }

    /// Turn rate; zero for CP and CV.
    pub fn omega(&self) -> f64 {
        self.values[4]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn lift(&self) -> FullState {
        lift(self)
    }
}

/// Five-component state shared by every model; absent components are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl FullState {
    pub fn to_array(&self) -> [f64; 5] {
        [self.x, self.z, self.theta, self.v, self.omega]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            x: a[0],
            z: a[1],
            theta: a[2],
            v: a[3],
            omega: a[4],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.to_array())
    }

    /// Drops the components `model` does not carry.
    pub fn truncate(&self, model: ModelId) -> ModelState {
        ModelState::new(model, &self.to_array()[..model.dim()]).unwrap()
    }
}

pub fn lift(state: &ModelState) -> FullState {
    FullState::from_array(state.values)
}

fn check_args(state: &ModelState, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !state.is_finite() {
        return Err(Error::invalid("state has non-finite components"));
    }
    Ok(())
}

/// Advances `state` by `dt` seconds under its own motion model.
pub fn propagate(state: &ModelState, dt: f64) -> Result<ModelState> {
    check_args(state, dt)?;
    let [x, z, theta, v, omega] = state.values;
    let next = match state.model {
        ModelId::Cp => return Ok(*state),
        ModelId::Cv => [
            x + v * theta.cos() * dt,
            z + v * theta.sin() * dt,
            theta,
            v,
            0.0,
        ],
        ModelId::Ctrv => {
            let mid = theta + 0.5 * omega * dt;
            [
                x + v * mid.cos() * dt,
                z + v * mid.sin() * dt,
                theta + omega * dt,
                v,
                omega,
            ]
        }
    };
    ModelState::new(state.model, &next[..state.model.dim()])
}

/// Jacobian of [`propagate`] with respect to the state, evaluated at `state`.
pub fn jacobian(state: &ModelState, dt: f64) -> Result<DMatrix<f64>> {
    check_args(state, dt)?;
    let d = state.dim();
    let mut a = DMatrix::identity(d, d);
    let [_, _, theta, v, omega] = state.values;
    match state.model {
        ModelId::Cp => {}
        ModelId::Cv => {
            let (s, c) = theta.sin_cos();
            a[(0, 2)] = -v * s * dt;
            a[(0, 3)] = c * dt;
            a[(1, 2)] = v * c * dt;
            a[(1, 3)] = s * dt;
        }
        ModelId::Ctrv => {
            let (s, c) = (theta + 0.5 * omega * dt).sin_cos();
            a[(0, 2)] = -v * s * dt;
            a[(0, 3)] = c * dt;
            a[(0, 4)] = -v * s * 0.5 * dt * dt;
            a[(1, 2)] = v * c * dt;
            a[(1, 3)] = s * dt;
            a[(1, 4)] = v * c * 0.5 * dt * dt;
            a[(2, 4)] = dt;
        }
    }
    Ok(a)
}

/// Diagonal noise parameters for the object filter.
///
/// Process noise is given per model as the diagonal of `Q` in the model's
/// own component order; `r` is the `(x, z, θ)` measurement noise diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub q_cp: [f64; 3],
    pub q_cv: [f64; 4],
    pub q_ctrv: [f64; 5],
    pub r: [f64; 3],
    /// Prior covariance diagonal for freshly created tracks, truncated per model.
    pub init_cov: [f64; 5],
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let (pos, head, vel, turn) = (0.01, 0.0025, 0.04, 0.01);
        Self {
            q_cp: [pos, pos, head],
            q_cv: [pos, pos, head, vel],
            q_ctrv: [pos, pos, head, vel, turn],
            r: [0.25, 0.25, 0.01],
            init_cov: [1e4, 1e4, 1e2, 1e2, 1e2],
        }
    }
}

impl NoiseConfig {
    pub fn q_diag(&self, model: ModelId) -> &[f64] {
        match model {
            ModelId::Cp => &self.q_cp,
            ModelId::Cv => &self.q_cv,
            ModelId::Ctrv => &self.q_ctrv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .q_cp
            .iter()
            .chain(&self.q_cv)
            .chain(&self.q_ctrv)
            .chain(&self.r)
            .chain(&self.init_cov);
        for v in all {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "noise diagonal entries must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn measurement_noise(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.r))
    }

    /// Scales every variance by `factor` (a standard-deviation multiplier squared).
    pub fn scaled(&self, factor: f64) -> Self {
        let f2 = factor * factor;
        let mut out = self.clone();
        out.q_cp.iter_mut().for_each(|v| *v *= f2);
        out.q_cv.iter_mut().for_each(|v| *v *= f2);
        out.q_ctrv.iter_mut().for_each(|v| *v *= f2);
        out.r.iter_mut().for_each(|v| *v *= f2);
        out
    }
}

pub fn process_noise(model: ModelId, cfg: &NoiseConfig) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(cfg.q_diag(model)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_jacobian(state: &ModelState, dt: f64, h: f64) -> DMatrix<f64> {
        let d = state.dim();
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut plus = state.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = propagate(&ModelState::new(state.model(), &plus).unwrap(), dt).unwrap();
            let fm = propagate(&ModelState::new(state.model(), &minus).unwrap(), dt).unwrap();
            for i in 0..d {
                let mut diff = fp.as_slice()[i] - fm.as_slice()[i];
                if i == 2 {
                    diff = wrap_angle(diff);
                }
                out[(i, j)] = diff / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn cp_is_identity() {
        let s = ModelState::cp(3.0, -1.0, 0.7);
        assert_eq!(propagate(&s, 0.1).unwrap(), s);
        assert_eq!(jacobian(&s, 0.1).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn cv_straight_line() {
        let s = ModelState::cv(0.0, 0.0, 0.0, 2.0);
        let n = propagate(&s, 0.5).unwrap();
        assert_eq!(n.as_slice(), &[1.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn ctrv_half_turn() {
        let s = ModelState::ctrv(0.0, 0.0, 0.0, 1.0, PI);
        let n = propagate(&s, 1.0).unwrap();
        let expected = [0.0, 1.0, PI, 1.0, PI];
        for (a, b) in n.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(n.model(), ModelId::Ctrv);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let s = ModelState::cv(0.0, 0.0, 0.0, 1.0);
        assert!(propagate(&s, 0.0).is_err());
        assert!(propagate(&s, -1.0).is_err());
        assert!(jacobian(&s, f64::NAN).is_err());
        let bad = ModelState::new(ModelId::Cv, &[f64::INFINITY, 0.0, 0.0, 1.0]).unwrap();
        assert!(propagate(&bad, 0.1).is_err());
        assert!(ModelState::new(ModelId::Cp, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let cv = ModelState::cv(0.0, 0.0, 0.0, 2.0);
        let ctrv = ModelState::ctrv(1.0, 2.0, 0.3, 1.5, 0.2);
        for (s, dt) in [(cv, 0.5), (ctrv, 0.1)] {
            let a = jacobian(&s, dt).unwrap();
            let fd = fd_jacobian(&s, dt, 1e-6);
            for (x, y) in a.iter().zip(fd.iter()) {
                assert!((x - y).abs() < 1e-6, "{a} vs {fd}");
            }
        }
    }

    #[test]
    fn lift_zero_fills() {
        assert_eq!(ModelState::cp(1.0, 2.0, 0.5).lift().to_array(), [1.0, 2.0, 0.5, 0.0, 0.0]);
        assert_eq!(ModelState::cv(1.0, 2.0, 0.5, 3.0).lift().to_array(), [1.0, 2.0, 0.5, 3.0, 0.0]);
        assert_eq!(
            ModelState::ctrv(1.0, 2.0, 0.5, 3.0, 0.1).lift().to_array(),
            [1.0, 2.0, 0.5, 3.0, 0.1]
        );
    }

    #[test]
    fn process_noise_shapes() {
        let cfg = NoiseConfig::default();
        for m in ModelId::ALL {
            let q = process_noise(m, &cfg);
            assert_eq!(q.shape(), (m.dim(), m.dim()));
            for i in 0..m.dim() {
                assert_eq!(q[(i, i)], cfg.q_diag(m)[i]);
                for j in 0..m.dim() {
                    if i != j {
                        assert_eq!(q[(i, j)], 0.0);
                    }
                }
            }
        }
        assert!(cfg.validate().is_ok());
        let mut bad = cfg.clone();
        bad.r[1] = 0.0;
        assert!(bad.validate().is_err());
    }

    fn arb_state(model: ModelId) -> impl Strategy<Value = ModelState> {
        (
            -50.0..50.0f64,
            -50.0..50.0f64,
            -3.0..3.0f64,
            -15.0..15.0f64,
            -1.0..1.0f64,
        )
            .prop_map(move |(x, z, t, v, w)| {
                ModelState::new(model, &[x, z, t, v, w][..model.dim()]).unwrap()
            })
    }

    proptest! {
        #[test]
        fn linear_models_compose_in_time(
            s in prop_oneof![arb_state(ModelId::Cp), arb_state(ModelId::Cv)],
            d1 in 0.01..1.0f64,
            d2 in 0.01..1.0f64,
        ) {
            let two = propagate(&propagate(&s, d1).unwrap(), d2).unwrap();
            let one = propagate(&s, d1 + d2).unwrap();
            for (a, b) in two.as_slice().iter().zip(one.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn ctrv_heading_composes_in_time(s in arb_state(ModelId::Ctrv), d1 in 0.01..1.0f64, d2 in 0.01..1.0f64) {
            let two = propagate(&propagate(&s, d1).unwrap(), d2).unwrap();
            let one = propagate(&s, d1 + d2).unwrap();
            prop_assert!(wrap_angle(two.theta() - one.theta()).abs() < 1e-9);
            prop_assert_eq!(two.v(), one.v());
            prop_assert_eq!(two.omega(), one.omega());
        }

        #[test]
        fn ctrv_reduces_to_cv_for_tiny_turn_rate(s in arb_state(ModelId::Cv), w in -1e-9..1e-9f64, dt in 0.01..1.0f64) {
            let ctrv = ModelState::ctrv(s.x(), s.z(), s.theta(), s.v(), w);
            let a = propagate(&ctrv, dt).unwrap();
            let b = propagate(&s, dt).unwrap();
            for i in 0..4 {
                let mut d = a.as_slice()[i] - b.as_slice()[i];
                if i == 2 { d = wrap_angle(d); }
                prop_assert!(d.abs() < 1e-8);
            }
        }

        #[test]
        fn lift_then_truncate_is_identity(
            s in prop_oneof![arb_state(ModelId::Cp), arb_state(ModelId::Cv), arb_state(ModelId::Ctrv)]
        ) {
            prop_assert_eq!(s.lift().truncate(s.model()), s);
        }

        #[test]
        fn propagated_heading_is_wrapped(s in arb_state(ModelId::Ctrv), dt in 0.01..10.0f64) {
            let n = propagate(&s, dt).unwrap();
            prop_assert!(n.theta() > -PI && n.theta() <= PI);
        }
    }
}
