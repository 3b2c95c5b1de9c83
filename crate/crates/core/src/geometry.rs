//! Rigid transforms, pinhole projection and the SE(3) exponential/logarithm.
//!
//! Tangent vectors are ordered rotation first, translation second:
//! `ξ = [ω; ρ]`. Poses are perturbed on the left, `T ← exp(δ) T`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix6, Rotation3, UnitQuaternion, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle the closed-form coefficients switch to series.
const SMALL_ANGLE: f64 = 0.1;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rigid transform `p ↦ R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Se3Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Se3Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Se3Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Rotation by `heading` in the `x`–`z` plane: maps the direction
    /// `(cos a, 0, sin a)` to `(cos(a + heading), 0, sin(a + heading))`.
    pub fn planar_rotation(heading: f64) -> Matrix3<f64> {
        let (s, c) = heading.sin_cos();
        Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
    }

    /// Camera-from-world transform of a camera at world `position` whose
    /// frame is rotated by `heading` in the `x`–`z` plane.
    pub fn camera_from_planar(position: Vector3<f64>, heading: f64) -> Self {
        let r_wc = Self::planar_rotation(heading);
        let r_cw = r_wc.transpose();
        Self::new(r_cw, -(r_cw * position))
    }

    /// Heading of the camera frame in the world `x`–`z` plane, assuming
    /// `self` maps world points into the camera frame.
    pub fn heading(&self) -> f64 {
        // First column of R_wc = first row of R_cw.
        self.rotation[(0, 2)].atan2(self.rotation[(0, 0)])
    }

    /// Derivative of [`Self::heading`] with respect to a left rotation perturbation.
    pub fn heading_jacobian(&self) -> Vector3<f64> {
        let r_wc = self.rotation.transpose();
        let a = r_wc.column(0);
        let n = a.x * a.x + a.z * a.z;
        let dphi_da = Vector3::new(-a.z / n, 0.0, a.x / n);
        // d a / dδω = R_wc [e_x]×
        let da = r_wc * skew(&Vector3::x());
        (dphi_da.transpose() * da).transpose()
    }

    /// Inverse translation: the origin of this frame in the target frame
    /// of the inverse transform (the camera center for camera-from-world poses).
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &Se3Pose) -> Se3Pose {
        Se3Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let orth = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        orth <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn exp(xi: &Vector6<f64>) -> Se3Pose {
        let omega = xi.fixed_rows::<3>(0).into_owned();
        let rho = xi.fixed_rows::<3>(3).into_owned();
        let rotation = Rotation3::from_scaled_axis(omega).into_inner();
        Se3Pose::new(rotation, so3_left_jacobian(&omega) * rho)
    }

    pub fn log(&self) -> Vector6<f64> {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation));
        let omega = q.scaled_axis();
        let rho = so3_left_jacobian_inv(&omega) * self.translation;
        let mut out = Vector6::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&omega);
        out.fixed_rows_mut::<3>(3).copy_from(&rho);
        out
    }

    /// Adjoint: `exp(Ad_T ξ) = T exp(ξ) T⁻¹`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let mut ad = Matrix6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rotation);
        ad.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(skew(&self.translation) * self.rotation));
        ad
    }

    /// `exp(δ) · self` with the rotation re-orthonormalized.
    pub fn retract(&self, delta: &Vector6<f64>) -> Se3Pose {
        let mut out = Se3Pose::exp(delta).compose(self);
        out.rotation = orthonormalize(&out.rotation);
        out
    }

    /// Row-major 3×4 `[R | t]`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn from_row_major(v: &[f64]) -> Result<Se3Pose> {
        if v.len() != 12 {
            return Err(Error::invalid(format!("pose needs 12 values, got {}", v.len())));
        }
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let pose = Se3Pose::new(rotation, Vector3::new(v[3], v[7], v[11]));
        if !pose.is_valid(1e-6) {
            return Err(Error::invalid("pose rotation is not orthonormal"));
        }
        Ok(pose)
    }
}

impl Mul for Se3Pose {
    type Output = Se3Pose;

    fn mul(self, rhs: Se3Pose) -> Se3Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Se3Pose> for &Se3Pose {
    type Output = Se3Pose;

    fn mul(self, rhs: &Se3Pose) -> Se3Pose {
        self.compose(rhs)
    }
}

pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r))
        .to_rotation_matrix()
        .into_inner()
}

/// SO(3) left Jacobian.
pub fn so3_left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let w = skew(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    Matrix3::identity() + w * a + w * w * b
}

pub fn so3_left_jacobian_inv(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let w = skew(omega);
    let c = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - w * 0.5 + w * w * c
}

/// Coupling block of the SE(3) left Jacobian.
fn se3_q(omega: &Vector3<f64>, rho: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let t2 = theta * theta;
    let (c1, c2, c3) = if theta < SMALL_ANGLE {
        (
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
            1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0,
            1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        (
            (theta - s) / (t2 * theta),
            (0.5 * t2 + c - 1.0) / (t2 * t2),
            (2.0 * theta + theta * c - 3.0 * s) / (2.0 * t2 * t2 * theta),
        )
    };
    let p = skew(omega);
    let r = skew(rho);
    let prp = p * r * p;
    r * 0.5
        + (p * r + r * p + prp) * c1
        + (p * p * r + r * p * p - prp * 3.0) * c2
        + (prp * p + p * prp) * c3
}

/// SE(3) left Jacobian: `exp(ξ + δ) ≈ exp(Jl δ) exp(ξ)`.
pub fn se3_left_jacobian(xi: &Vector6<f64>) -> Matrix6<f64> {
    let omega = xi.fixed_rows::<3>(0).into_owned();
    let rho = xi.fixed_rows::<3>(3).into_owned();
    let j = so3_left_jacobian(&omega);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&j);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&se3_q(&omega, &rho));
    out
}

pub fn se3_left_jacobian_inv(xi: &Vector6<f64>) -> Matrix6<f64> {
    let omega = xi.fixed_rows::<3>(0).into_owned();
    let rho = xi.fixed_rows::<3>(3).into_owned();
    let j_inv = so3_left_jacobian_inv(&omega);
    let q = se3_q(&omega, &rho);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&j_inv);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&j_inv);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-(j_inv * q * j_inv)));
    out
}

pub fn se3_right_jacobian_inv(xi: &Vector6<f64>) -> Matrix6<f64> {
    se3_left_jacobian_inv(&(-xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraIntrinsics {
    /// KITTI-like focal length for a 1242×375 image.
    fn default() -> Self {
        Self {
            fx: 721.5,
            fy: 721.5,
            cx: 609.6,
            cy: 172.9,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        Ok(())
    }

    /// Projects a camera-frame point; fails for non-positive depth.
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        if !(p.z > 0.0) {
            return Err(Error::Cheirality { depth: p.z });
        }
        Ok(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Camera-frame point at `depth` along the ray through `pixel`.
    pub fn back_project(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx * depth,
            (pixel.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Jacobian of [`Self::project`] with respect to the camera-frame point.
    pub fn project_jacobian(&self, p: &Vector3<f64>) -> nalgebra::Matrix2x3<f64> {
        let iz = 1.0 / p.z;
        let iz2 = iz * iz;
        nalgebra::Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * p.x * iz2,
            0.0,
            self.fy * iz,
            -self.fy * p.y * iz2,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_xi(scale: f64) -> impl Strategy<Value = Vector6<f64>> {
        proptest::array::uniform6(-scale..scale).prop_map(|a| Vector6::from_column_slice(&a))
    }

    #[test]
    fn planar_pose_heading_roundtrip() {
        for h in [-3.0, -1.2, 0.0, 0.4, 2.9] {
            let p = Se3Pose::camera_from_planar(Vector3::new(1.0, -1.5, 3.0), h);
            assert!((p.heading() - h).abs() < 1e-12);
            assert!((p.center() - Vector3::new(1.0, -1.5, 3.0)).norm() < 1e-12);
            assert!(p.is_valid(1e-12));
        }
    }

    #[test]
    fn exp_of_pure_translation() {
        let xi = Vector6::new(0.0, 0.0, 0.0, 0.1, -0.2, 0.3);
        let t = Se3Pose::exp(&xi);
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.translation, Vector3::new(0.1, -0.2, 0.3));
    }

    #[test]
    fn heading_jacobian_matches_finite_differences() {
        let pose = Se3Pose::exp(&Vector6::new(0.1, 0.7, -0.2, 1.0, 2.0, 3.0));
        let j = pose.heading_jacobian();
        let h = 1e-6;
        for k in 0..3 {
            let mut d = Vector6::zeros();
            d[k] = h;
            let fd = (pose.retract(&d).heading() - pose.retract(&-d).heading()) / (2.0 * h);
            assert!((fd - j[k]).abs() < 1e-7, "{fd} vs {}", j[k]);
        }
    }

    #[test]
    fn row_major_roundtrip() {
        let p = Se3Pose::exp(&Vector6::new(0.1, 0.2, 0.3, 1.0, 2.0, 3.0));
        let q = Se3Pose::from_row_major(&p.to_row_major()).unwrap();
        assert_eq!(p, q);
        assert!(Se3Pose::from_row_major(&[0.0; 12]).is_err());
    }

    #[test]
    fn projection_roundtrip() {
        let k = CameraIntrinsics::default();
        let px = Vector2::new(320.0, 240.0);
        let p = k.back_project(&px, 5.0);
        assert!((k.project(&p).unwrap() - px).norm() < 1e-12);
        assert!(k.project(&Vector3::new(0.0, 0.0, -1.0)).is_err());
    }

    proptest! {
        #[test]
        fn exp_log_roundtrip(xi in arb_xi(1.5)) {
            let back = Se3Pose::exp(&xi).log();
            prop_assert!((back - xi).norm() < 1e-9);
        }

        #[test]
        fn left_jacobian_inverse(xi in arb_xi(2.0)) {
            let prod = se3_left_jacobian(&xi) * se3_left_jacobian_inv(&xi);
            prop_assert!((prod - Matrix6::identity()).norm() < 1e-9);
        }

        #[test]
        fn left_jacobian_first_order(xi in arb_xi(1.0), d in arb_xi(1.0)) {
            let d = d * 1e-6;
            let lhs = Se3Pose::exp(&(xi + d));
            let rhs = Se3Pose::exp(&(se3_left_jacobian(&xi) * d)).compose(&Se3Pose::exp(&xi));
            let err = lhs.inverse().compose(&rhs).log().norm();
            prop_assert!(err < 1e-10, "err {}", err);
        }

        #[test]
        fn adjoint_conjugates(xi in arb_xi(1.0), t in arb_xi(2.0)) {
            let tp = Se3Pose::exp(&t);
            let lhs = Se3Pose::exp(&(tp.adjoint() * xi));
            let rhs = tp.compose(&Se3Pose::exp(&xi)).compose(&tp.inverse());
            prop_assert!((lhs.rotation - rhs.rotation).norm() < 1e-9);
            prop_assert!((lhs.translation - rhs.translation).norm() < 1e-9);
        }

        #[test]
        fn inverse_composes_to_identity(t in arb_xi(2.0)) {
            let p = Se3Pose::exp(&t);
            let id = p.compose(&p.inverse());
            prop_assert!(id.log().norm() < 1e-12);
        }
    }
}
