//! Residual functions of the joint graph and their analytic Jacobians.
//!
//! Pose Jacobians are taken with respect to a left perturbation
//! `T ← exp(δ) T`, `δ = [ω; ρ]`. Object Jacobians are plain partial
//! derivatives with respect to the vertex components.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix2x6, Matrix3, Matrix4x6, Matrix6, Vector2, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, skew, CameraIntrinsics, Se3Pose};
use crate::motion::{wrap_angle, ModelId};

/// Object state as optimized in the graph: pose `(x, y, z, θ)` followed by
/// the model's velocity components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub model: ModelId,
    values: [f64; 6],
}

impl ObjectState {
    pub fn new(model: ModelId, components: &[f64]) -> Result<Self> {
        let dim = Self::dim_of(model);
        if components.len() != dim {
            return Err(Error::invalid(format!(
                "{model} object vertex needs {dim} components, got {}",
                components.len()
            )));
        }
        let mut values = [0.0; 6];
        values[..dim].copy_from_slice(components);
        values[3] = wrap_angle(values[3]);
        Ok(Self { model, values })
    }

    /// Builds the vertex from `(x, y, z, θ, v, ω)`, dropping what `model` lacks.
    pub fn from_full(model: ModelId, full: [f64; 6]) -> Self {
        Self::new(model, &full[..Self::dim_of(model)]).unwrap()
    }

    pub const fn dim_of(model: ModelId) -> usize {
        4 + model.velocity_dim()
    }

    pub fn dim(&self) -> usize {
        Self::dim_of(self.model)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim()]
    }

    /// Six components with absent velocities as zero.
    pub fn full(&self) -> [f64; 6] {
        self.values
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.values[0], self.values[1], self.values[2])
    }

    pub fn theta(&self) -> f64 {
        self.values[3]
    }

    pub fn pose_state(&self) -> Vector4<f64> {
        Vector4::new(self.values[0], self.values[1], self.values[2], self.values[3])
    }

    pub fn velocity(&self) -> &[f64] {
        &self.values[4..self.dim()]
    }

    /// Adds `delta` componentwise and re-wraps the heading.
    pub fn apply(&mut self, delta: &[f64]) {
        for (v, d) in self.values.iter_mut().zip(delta) {
            *v += d;
        }
        self.values[3] = wrap_angle(self.values[3]);
    }
}

/// Camera-frame object detection `(p, θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    pub position: Vector3<f64>,
    pub theta: f64,
}

/// `u - π(T m)`.
pub fn residual_reprojection(
    pose: &Se3Pose,
    point: &Vector3<f64>,
    pixel: &Vector2<f64>,
    k: &CameraIntrinsics,
) -> Result<Vector2<f64>> {
    let pc = pose.transform(point);
    Ok(pixel - k.project(&pc)?)
}

pub fn reprojection_jacobians(
    pose: &Se3Pose,
    point: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<(Matrix2x6<f64>, Matrix2x3<f64>)> {
    let pc = pose.transform(point);
    if !(pc.z > 0.0) {
        return Err(Error::Cheirality { depth: pc.z });
    }
    let dproj = k.project_jacobian(&pc);
    let mut dpc_dpose = nalgebra::Matrix3x6::zeros();
    dpc_dpose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&pc)));
    dpc_dpose.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    Ok((-(dproj * dpc_dpose), -(dproj * pose.rotation)))
}

/// `log((T_rel T_t)⁻¹ T_{t+1})`, rotation part first.
pub fn residual_odometry(t_t: &Se3Pose, t_t1: &Se3Pose, t_rel: &Se3Pose) -> Vector6<f64> {
    t_rel.compose(t_t).inverse().compose(t_t1).log()
}

/// Jacobians of [`residual_odometry`] with respect to `t_t` and `t_t1`.
pub fn odometry_jacobians(
    t_t: &Se3Pose,
    t_t1: &Se3Pose,
    t_rel: &Se3Pose,
) -> (Matrix6<f64>, Matrix6<f64>) {
    let e = residual_odometry(t_t, t_t1, t_rel);
    let d_from = -(geometry::se3_left_jacobian_inv(&e) * t_t.inverse().adjoint());
    let d_to = geometry::se3_right_jacobian_inv(&e) * t_t1.inverse().adjoint();
    (d_from, d_to)
}

/// `[(T p)_{1:3}, θ - φ] - o^z` with the heading wrapped, where `φ` is the
/// ego heading read off the pose.
pub fn residual_object_measurement(
    pose: &Se3Pose,
    obj: &ObjectState,
    z: &ObjectObservation,
) -> Vector4<f64> {
    residual_object_measurement_with_yaw(pose, obj, z, pose.heading())
}

/// Same as [`residual_object_measurement`] with an explicit ego heading.
pub fn residual_object_measurement_with_yaw(
    pose: &Se3Pose,
    obj: &ObjectState,
    z: &ObjectObservation,
    ego_yaw: f64,
) -> Vector4<f64> {
    let p = pose.transform(&obj.position()) - z.position;
    Vector4::new(p.x, p.y, p.z, wrap_angle(obj.theta() - ego_yaw - z.theta))
}

pub fn object_measurement_jacobians(pose: &Se3Pose, obj: &ObjectState) -> (Matrix4x6<f64>, DMatrix<f64>) {
    let pc = pose.transform(&obj.position());
    let mut d_pose = Matrix4x6::zeros();
    d_pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&pc)));
    d_pose.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    let dphi = pose.heading_jacobian();
    for k in 0..3 {
        d_pose[(3, k)] = -dphi[k];
    }
    let mut d_obj = DMatrix::zeros(4, obj.dim());
    d_obj.view_mut((0, 0), (3, 3)).copy_from(&pose.rotation);
    d_obj[(3, 3)] = 1.0;
    (d_pose, d_obj)
}

/// Predicted pose part `g_s(s)` after `dt` seconds; `y` stays constant.
pub fn predict_pose_state(s: &ObjectState, dt: f64) -> Vector4<f64> {
    let [x, y, z, theta, v, omega] = s.full();
    match s.model {
        ModelId::Cp => Vector4::new(x, y, z, theta),
        ModelId::Cv => Vector4::new(x + v * theta.cos() * dt, y, z + v * theta.sin() * dt, theta),
        ModelId::Ctrv => {
            let mid = theta + 0.5 * omega * dt;
            Vector4::new(
                x + v * mid.cos() * dt,
                y,
                z + v * mid.sin() * dt,
                wrap_angle(theta + omega * dt),
            )
        }
    }
}

fn predict_jacobian(s: &ObjectState, dt: f64) -> DMatrix<f64> {
    let [_, _, _, theta, v, omega] = s.full();
    let mut j = DMatrix::zeros(4, s.dim());
    j.view_mut((0, 0), (4, 4)).fill_with_identity();
    match s.model {
        ModelId::Cp => {}
        ModelId::Cv => {
            let (sn, c) = theta.sin_cos();
            j[(0, 3)] = -v * sn * dt;
            j[(0, 4)] = c * dt;
            j[(2, 3)] = v * c * dt;
            j[(2, 4)] = sn * dt;
        }
        ModelId::Ctrv => {
            let (sn, c) = (theta + 0.5 * omega * dt).sin_cos();
            j[(0, 3)] = -v * sn * dt;
            j[(0, 4)] = c * dt;
            j[(0, 5)] = -v * sn * 0.5 * dt * dt;
            j[(2, 3)] = v * c * dt;
            j[(2, 4)] = sn * dt;
            j[(2, 5)] = v * c * 0.5 * dt * dt;
            j[(3, 5)] = dt;
        }
    }
    j
}

fn check_pair(s_t: &ObjectState, s_t1: &ObjectState) -> Result<()> {
    if s_t.model != s_t1.model {
        return Err(Error::invalid(format!(
            "object edge joins {} and {} vertices",
            s_t.model, s_t1.model
        )));
    }
    Ok(())
}

/// `o_{t+1} - g_s(s_t)` with the heading wrapped.
pub fn residual_object_system(s_t: &ObjectState, s_t1: &ObjectState, dt: f64) -> Result<Vector4<f64>> {
    check_pair(s_t, s_t1)?;
    let mut e = s_t1.pose_state() - predict_pose_state(s_t, dt);
    e[3] = wrap_angle(e[3]);
    Ok(e)
}

pub fn system_jacobians(s_t: &ObjectState, s_t1: &ObjectState, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d_from = -predict_jacobian(s_t, dt);
    let mut d_to = DMatrix::zeros(4, s_t1.dim());
    d_to.view_mut((0, 0), (4, 4)).fill_with_identity();
    (d_from, d_to)
}

/// `v_{t+1} - v_t`; defined for CV and CTRV only.
pub fn residual_constant_motion(s_t: &ObjectState, s_t1: &ObjectState) -> Result<DVector<f64>> {
    check_pair(s_t, s_t1)?;
    if s_t.model == ModelId::Cp {
        return Err(Error::invalid("constant-motion residual is undefined for CP"));
    }
    Ok(DVector::from_iterator(
        s_t.model.velocity_dim(),
        s_t1.velocity().iter().zip(s_t.velocity()).map(|(b, a)| b - a),
    ))
}

pub fn constant_motion_jacobians(s_t: &ObjectState) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = s_t.model.velocity_dim();
    let mut d_from = DMatrix::zeros(k, s_t.dim());
    let mut d_to = DMatrix::zeros(k, s_t.dim());
    for i in 0..k {
        d_from[(i, 4 + i)] = -1.0;
        d_to[(i, 4 + i)] = 1.0;
    }
    (d_from, d_to)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reprojection_exact_and_offset() {
        let k = CameraIntrinsics::default();
        let px = Vector2::new(320.0, 240.0);
        let m = k.back_project(&px, 5.0);
        let id = Se3Pose::identity();
        assert!(residual_reprojection(&id, &m, &px, &k).unwrap().norm() < 1e-12);
        let off = residual_reprojection(&id, &m, &(px + Vector2::new(2.0, -3.0)), &k).unwrap();
        assert!((off - Vector2::new(2.0, -3.0)).norm() < 1e-12);
        let behind = Vector3::new(0.0, 0.0, -2.0);
        assert!(matches!(
            residual_reprojection(&id, &behind, &px, &k),
            Err(Error::Cheirality { .. })
        ));
    }

    #[test]
    fn odometry_identity_and_translation() {
        let t = Se3Pose::exp(&Vector6::new(0.1, -0.2, 0.3, 1.0, 2.0, 3.0));
        let rel = Se3Pose::exp(&Vector6::new(0.01, 0.02, -0.03, 0.5, 0.0, 1.0));
        let t1 = rel.compose(&t);
        assert!(residual_odometry(&t, &t1, &rel).norm() < 1e-12);

        let id = Se3Pose::identity();
        let shifted = Se3Pose::from_translation(Vector3::new(0.1, 0.0, 0.0));
        let e = residual_odometry(&id, &shifted, &id);
        assert!((e - Vector6::new(0.0, 0.0, 0.0, 0.1, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn object_measurement_basic() {
        let id = Se3Pose::identity();
        let obj = ObjectState::new(ModelId::Cv, &[1.0, 0.5, 10.0, 0.3, 2.0]).unwrap();
        let z = ObjectObservation {
            position: Vector3::new(1.0, 0.5, 10.0),
            theta: 0.3,
        };
        assert!(residual_object_measurement(&id, &obj, &z).norm() < 1e-15);
        let moved = ObjectState::new(ModelId::Cv, &[1.5, 0.5, 10.0, 0.3, 2.0]).unwrap();
        let e = residual_object_measurement(&id, &moved, &z);
        assert!((e - Vector4::new(0.5, 0.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn system_residual_cases() {
        let cp = ObjectState::new(ModelId::Cp, &[1.0, 2.0, 3.0, 0.4]).unwrap();
        assert_eq!(residual_object_system(&cp, &cp, 0.1).unwrap(), Vector4::zeros());

        let cv = ObjectState::new(ModelId::Cv, &[0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        let next = ObjectState::new(ModelId::Cv, &[1.2, 1.0, 0.0, 0.0, 2.0]).unwrap();
        let e = residual_object_system(&cv, &next, 0.5).unwrap();
        assert!((e - Vector4::new(0.2, 0.0, 0.0, 0.0)).norm() < 1e-15);

        let ctrv = ObjectState::new(ModelId::Ctrv, &[1.0, 0.5, 2.0, 0.3, 4.0, 0.2]).unwrap();
        let p = predict_pose_state(&ctrv, 0.1);
        let exact = ObjectState::new(ModelId::Ctrv, &[p[0], p[1], p[2], p[3], 4.0, 0.2]).unwrap();
        assert!(residual_object_system(&ctrv, &exact, 0.1).unwrap().norm() < 1e-15);
        assert!(residual_object_system(&cp, &cv, 0.1).is_err());
    }

    #[test]
    fn constant_motion_cases() {
        let a = ObjectState::new(ModelId::Cv, &[0.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let b = ObjectState::new(ModelId::Cv, &[0.0, 0.0, 0.0, 0.0, 2.3]).unwrap();
        assert!((residual_constant_motion(&a, &b).unwrap()[0] - 0.3).abs() < 1e-15);
        assert_eq!(residual_constant_motion(&a, &a).unwrap()[0], 0.0);

        let c = ObjectState::new(ModelId::Ctrv, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.1]).unwrap();
        let d = ObjectState::new(ModelId::Ctrv, &[0.0, 0.0, 0.0, 0.0, 1.4, 0.05]).unwrap();
        let e = residual_constant_motion(&c, &d).unwrap();
        assert!((e[0] - 0.4).abs() < 1e-15 && (e[1] + 0.05).abs() < 1e-15);

        let cp = ObjectState::new(ModelId::Cp, &[0.0; 4]).unwrap();
        assert!(residual_constant_motion(&cp, &cp).is_err());
    }
}
