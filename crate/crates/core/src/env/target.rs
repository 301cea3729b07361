use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{exp_rotation_vector, Pose, Vec3};

/// Hollow hemisphere around the arm mount, on the mount's +z side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            inner_radius: 0.25,
            outer_radius: 0.65,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    /// Inertial frame, which coincides with the base frame at episode start.
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub spin_rate: f64,
    pub spin_axis: Vec3,
}

impl TargetSpec {
    pub fn fixed(pose: &Pose) -> Self {
        Self {
            position: pose.translation,
            orientation: UnitQuaternion::from_rotation_matrix(&pose.rotation),
            spin_rate: 0.0,
            spin_axis: Vec3::z(),
        }
    }

    /// Pose after `elapsed` seconds of spinning about `spin_axis`.
    pub fn pose_at(&self, elapsed: f64) -> Pose {
        let rot = if self.spin_rate == 0.0 {
            self.orientation
        } else {
            exp_rotation_vector(&(self.spin_axis * (self.spin_rate * elapsed))) * self.orientation
        };
        Pose::new(rot.to_rotation_matrix(), self.position)
    }
}

pub fn uniform_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (t1, t2) = (2.0 * PI * u2, 2.0 * PI * u3);
    UnitQuaternion::new_normalize(Quaternion::new(b * t2.cos(), a * t1.sin(), a * t1.cos(), b * t2.sin()))
}

pub fn uniform_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Position uniform over the hollow-hemisphere volume around `mount`,
/// orientation uniform over the rotation group, no spin.
pub fn sample_target<R: Rng + ?Sized>(mount: &Pose, ws: &Workspace, rng: &mut R) -> TargetSpec {
    let (ri3, ro3) = (ws.inner_radius.powi(3), ws.outer_radius.powi(3));
    let r = (ri3 + rng.random::<f64>() * (ro3 - ri3)).cbrt();
    let z: f64 = rng.random();
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    let local = Vec3::new(s * phi.cos(), s * phi.sin(), z) * r;
    TargetSpec {
        position: mount.transform_point(&local),
        orientation: uniform_unit_quaternion(rng),
        spin_rate: 0.0,
        spin_axis: Vec3::z(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mat3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_fill_the_hollow_hemisphere_uniformly() {
        let mount = Pose::from_translation(Vec3::new(0.0, -0.4, 0.6));
        let ws = Workspace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let mut cubes = Vec::with_capacity(n);
        let mut mean_rot = Mat3::zeros();
        for _ in 0..n {
            let t = sample_target(&mount, &ws, &mut rng);
            let rel = t.position - mount.translation;
            let r = rel.norm();
            assert!(r >= 0.25 - 1e-12 && r <= 0.65 + 1e-12);
            assert!(rel.z >= 0.0);
            cubes.push(r.powi(3));
            mean_rot += t.orientation.to_rotation_matrix().matrix();
        }
        // r³ is uniform on [0.25³, 0.65³]
        let (a, b) = (0.25f64.powi(3), 0.65f64.powi(3));
        let mean = cubes.iter().sum::<f64>() / n as f64;
        let sigma = (b - a) / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5 * (a + b)).abs() < 3.0 * sigma);
        // rotation entries of a uniform rotation have mean 0 and variance 1/3
        let entry_sigma = (1.0 / 3.0f64).sqrt() / (n as f64).sqrt();
        mean_rot /= n as f64;
        assert!(mean_rot.abs().max() < 3.0 * entry_sigma, "{mean_rot}");
    }

    #[test]
    fn spin_rotates_about_axis() {
        let t = TargetSpec {
            position: Vec3::zeros(),
            orientation: UnitQuaternion::identity(),
            spin_rate: 0.2,
            spin_axis: Vec3::z(),
        };
        let p = t.pose_at(5.0);
        let angle = crate::geometry::geodesic_angle(&p.rotation, &nalgebra::Rotation3::identity());
        assert!((angle - 1.0).abs() < 1e-12);
        assert_eq!(t.pose_at(0.0).translation, Vec3::zeros());
    }
}
