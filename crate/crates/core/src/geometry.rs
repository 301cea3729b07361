//! Rotation and rigid-transform algebra.
//!
//! Rotations are carried as [`Rotation3`] (a 3×3 proper orthogonal matrix) and
//! attitudes as [`UnitQuaternion`]. Euler angles use the Z-Y-X sequence,
//! `R = Rz(yaw) · Ry(pitch) · Rx(roll)`, stored as `(roll, pitch, yaw)`.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Half-width of the excluded band around pitch = ±π/2.
pub const GIMBAL_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("gimbal lock: pitch {pitch} rad is within {GIMBAL_MARGIN} of ±π/2")]
    GimbalLock { pitch: f64 },
}

pub fn quat_to_matrix(q: &UnitQuaternion<f64>) -> Rotation3<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let m = Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    Rotation3::from_matrix_unchecked(m)
}

pub fn matrix_to_quat(r: &Rotation3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(r)
}

/// Renormalizes a raw quaternion. Used after integration steps.
pub fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q)
}

/// Quaternion exponential of a rotation vector `phi` (radians, axis·angle).
pub fn exp_rotation_vector(phi: &Vec3) -> UnitQuaternion<f64> {
    let angle = phi.norm();
    if angle < 1e-12 {
        // second-order series keeps the map smooth through zero
        let half = 0.5 * phi;
        return renormalize(Quaternion::new(1.0 - 0.125 * angle * angle, half.x, half.y, half.z));
    }
    let half = 0.5 * angle;
    let s = half.sin() / angle;
    renormalize(Quaternion::new(half.cos(), s * phi.x, s * phi.y, s * phi.z))
}

/// Rotation vector of `r` (inverse of the exponential map), angle in [0, π].
pub fn log_rotation(r: &Rotation3<f64>) -> Vec3 {
    let m = r.matrix();
    // sin(θ)·axis from the skew part; atan2 keeps small angles accurate
    let s = 0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let c = 0.5 * (m.trace() - 1.0);
    let sn = s.norm();
    if c < -0.99 {
        return r.scaled_axis();
    }
    if sn < 1e-300 {
        return Vec3::zeros();
    }
    s * (sn.atan2(c) / sn)
}

pub fn axis_angle(axis: &Vec3, angle: f64) -> Rotation3<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Rotation3::identity();
    }
    Rotation3::from_scaled_axis(axis * (angle / n))
}

/// Angle of the relative rotation `Raᵀ·Rb`, in [0, π].
pub fn geodesic_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let rel = a.matrix().transpose() * b.matrix();
    let s = Vec3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]).norm() * 0.5;
    s.atan2((rel.trace() - 1.0) * 0.5)
}

pub fn skew(v: &Vec3) -> Mat3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Z-Y-X Euler angles. Each component lies in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZyx {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

fn wrap_half_open(a: f64) -> f64 {
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

impl EulerZyx {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_matrix(r: &Rotation3<f64>) -> Result<Self, GeometryError> {
        let m = r.matrix();
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        if pitch.abs() >= FRAC_PI_2 - GIMBAL_MARGIN {
            return Err(GeometryError::GimbalLock { pitch });
        }
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        Ok(Self {
            roll: wrap_half_open(roll),
            pitch,
            yaw: wrap_half_open(yaw),
        })
    }

    pub fn to_matrix(&self) -> Rotation3<f64> {
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), self.pitch);
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll);
        rz * ry * rx
    }

    pub fn as_vector(&self) -> Vec3 {
        Vec3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn l1_norm(&self) -> f64 {
        self.roll.abs() + self.pitch.abs() + self.yaw.abs()
    }
}

/// First two columns of a rotation matrix, column-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6d(pub [f64; 6]);

impl Rot6d {
    pub fn encode(r: &Rotation3<f64>) -> Self {
        let m = r.matrix();
        Self([m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]])
    }

    /// Gram–Schmidt decode. Accepts any encoding whose columns are not parallel.
    pub fn decode(&self) -> Rotation3<f64> {
        let a = Vec3::new(self.0[0], self.0[1], self.0[2]);
        let b = Vec3::new(self.0[3], self.0[4], self.0[5]);
        let c1 = a.normalize();
        let c2 = (b - c1 * c1.dot(&b)).normalize();
        let c3 = c1.cross(&c2);
        Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[c1, c2, c3]))
    }
}

/// Rigid transform: `x ↦ rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation3::identity(), t)
    }

    /// Fixed-axis roll/pitch/yaw as used by URDF origins (`Rz·Ry·Rx`).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let rot = EulerZyx::new(rpy[0], rpy[1], rpy[2]).to_matrix();
        Self::new(rot, Vec3::from(xyz))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.inverse();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Continuous pose encoding: translation followed by the [`Rot6d`] block.
    pub fn encode_cpr(&self) -> [f64; 9] {
        let r = Rot6d::encode(&self.rotation).0;
        let t = &self.translation;
        [t.x, t.y, t.z, r[0], r[1], r[2], r[3], r[4], r[5]]
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.translation + self.translation,
        )
    }
}

impl Mul for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        *self * *rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_quat(rng: &mut impl Rng) -> UnitQuaternion<f64> {
        // Shoemake's uniform quaternion
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let t1 = 2.0 * PI * u2;
        let t2 = 2.0 * PI * u3;
        UnitQuaternion::new_unchecked(Quaternion::new(b * t2.cos(), a * t1.sin(), a * t1.cos(), b * t2.sin()))
    }

    fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn identity_quaternion_is_identity_matrix() {
        let r = quat_to_matrix(&UnitQuaternion::identity());
        assert_eq!(*r.matrix(), Mat3::identity());
    }

    #[test]
    fn quarter_turn_about_x() {
        let h = std::f64::consts::FRAC_PI_4;
        let q = UnitQuaternion::new_unchecked(Quaternion::new(h.cos(), h.sin(), 0.0, 0.0));
        let r = quat_to_matrix(&q);
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!(max_abs_diff(r.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn quaternion_matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let q = random_quat(&mut rng);
            let r = quat_to_matrix(&q);
            let back = quat_to_matrix(&matrix_to_quat(&r));
            worst = worst.max(max_abs_diff(r.matrix(), back.matrix()));
            let m = r.matrix();
            assert!((m.transpose() * m - Mat3::identity()).abs().max() < 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
        assert!(worst < 1e-9, "worst {worst}");
    }

    #[test]
    fn geodesic_reference_values() {
        let i = Rotation3::identity();
        assert_eq!(geodesic_angle(&i, &i), 0.0);
        let rz = axis_angle(&Vec3::z(), FRAC_PI_2);
        assert!((geodesic_angle(&i, &rz) - FRAC_PI_2).abs() < 1e-12);
        for axis in [Vec3::x(), Vec3::y(), Vec3::new(1.0, -2.0, 0.5)] {
            let r = axis_angle(&axis, PI);
            assert!((geodesic_angle(&i, &r) - PI).abs() < 1e-7);
        }
        let r = axis_angle(&Vec3::new(0.3, -1.0, 2.0), 1.234);
        assert!(geodesic_angle(&r, &r) < 1e-15);
        assert!((geodesic_angle(&r, &(r * axis_angle(&Vec3::x(), 1e-9))) - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn cpr_reference_values() {
        assert_eq!(
            Pose::identity().encode_cpr(),
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        let p = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(p.encode_cpr(), [1.0, 2.0, 3.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let rz = Pose::new(axis_angle(&Vec3::z(), FRAC_PI_2), Vec3::zeros());
        let expected = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in rz.encode_cpr().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn euler_reference_values() {
        let e = EulerZyx::from_matrix(&Rotation3::identity()).unwrap();
        assert_eq!(e, EulerZyx::new(0.0, 0.0, 0.0));
        let e = EulerZyx::from_matrix(&axis_angle(&Vec3::z(), 0.3)).unwrap();
        assert!(e.roll.abs() < 1e-15 && e.pitch.abs() < 1e-15);
        assert!((e.yaw - 0.3).abs() < 1e-15);
        let lock = EulerZyx::new(0.0, FRAC_PI_2, 0.0).to_matrix();
        assert!(matches!(
            EulerZyx::from_matrix(&lock),
            Err(GeometryError::GimbalLock { .. })
        ));
    }

    #[test]
    fn euler_and_rot6d_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut checked = 0;
        while checked < 1000 {
            let r = quat_to_matrix(&random_quat(&mut rng));
            let Ok(e) = EulerZyx::from_matrix(&r) else { continue };
            assert!(e.roll > -PI && e.roll <= PI && e.yaw > -PI && e.yaw <= PI);
            let back = e.to_matrix();
            assert!(max_abs_diff(r.matrix(), back.matrix()) < 1e-9);
            let e2 = EulerZyx::from_matrix(&back).unwrap();
            assert!((e2.as_vector() - e.as_vector()).abs().max() < 1e-9);
            let dec = Rot6d::encode(&r).decode();
            assert!(max_abs_diff(r.matrix(), dec.matrix()) < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn pose_inverse_composes_to_identity() {
        let p = Pose::from_xyz_rpy([0.1, -0.4, 0.6], [0.3, -0.2, 1.1]);
        let i = p * p.inverse();
        assert!((i.translation).norm() < 1e-15);
        assert!(geodesic_angle(&i.rotation, &Rotation3::identity()) < 1e-7);
    }

    #[test]
    fn exp_map_matches_axis_angle() {
        let phi = Vec3::new(0.2, -0.1, 0.4);
        let q = exp_rotation_vector(&phi);
        let r = axis_angle(&phi, phi.norm());
        assert!(max_abs_diff(quat_to_matrix(&q).matrix(), r.matrix()) < 1e-14);
        assert!((log_rotation(&r) - phi).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn geodesic_metric_properties(
            a in prop::array::uniform3(-3.0f64..3.0),
            b in prop::array::uniform3(-3.0f64..3.0),
            c in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let ra = Rotation3::from_scaled_axis(Vec3::from(a));
            let rb = Rotation3::from_scaled_axis(Vec3::from(b));
            let q = Rotation3::from_scaled_axis(Vec3::from(c));
            let d = geodesic_angle(&ra, &rb);
            prop_assert!((0.0..=PI).contains(&d));
            prop_assert!((d - geodesic_angle(&rb, &ra)).abs() < 1e-9);
            prop_assert!((d - geodesic_angle(&(q * ra), &(q * rb))).abs() < 1e-7);
            prop_assert!(geodesic_angle(&ra, &ra) < 1e-7);
        }

        #[test]
        fn perturbed_rot6d_decodes_to_proper_rotation(
            c in prop::array::uniform3(-3.0f64..3.0),
            noise in prop::array::uniform6(-1e-3f64..1e-3),
        ) {
            let mut enc = Rot6d::encode(&Rotation3::from_scaled_axis(Vec3::from(c)));
            for (e, n) in enc.0.iter_mut().zip(noise) {
                *e += n;
            }
            let m = *enc.decode().matrix();
            prop_assert!((m.transpose() * m - Mat3::identity()).abs().max() < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn exp_map_stays_unit(phi in prop::array::uniform3(-10.0f64..10.0)) {
            let q = exp_rotation_vector(&Vec3::from(phi));
            prop_assert!((q.as_ref().norm() - 1.0).abs() < 1e-9);
        }
    }
}
