use nalgebra::{Matrix6, SMatrix};

use super::model::{JointVec, SystemModel, SystemState, NUM_JOINTS};
use crate::geometry::{axis_angle, skew, Mat3, Pose, Vec3};

/// World-frame placement of every body for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub base: Pose,
    /// Link frames (after each joint rotation).
    pub links: [Pose; NUM_JOINTS],
    /// Joint axes, world frame.
    pub joint_axes: [Vec3; NUM_JOINTS],
    /// Joint frame origins, world frame.
    pub joint_origins: [Vec3; NUM_JOINTS],
    pub ee: Pose,
    /// Body CoMs, base first.
    pub body_coms: [Vec3; NUM_JOINTS + 1],
    /// Body inertias about their CoMs, world frame, base first.
    pub body_inertias: [Mat3; NUM_JOINTS + 1],
    pub com: Vec3,
}

impl Kinematics {
    pub fn compute(model: &SystemModel, base: &Pose, q: &JointVec) -> Self {
        let mut links = [Pose::identity(); NUM_JOINTS];
        let mut joint_axes = [Vec3::zeros(); NUM_JOINTS];
        let mut joint_origins = [Vec3::zeros(); NUM_JOINTS];
        let mut body_coms = [Vec3::zeros(); NUM_JOINTS + 1];
        let mut body_inertias = [Mat3::zeros(); NUM_JOINTS + 1];

        let world_inertia = |pose: &Pose, i: &Mat3| {
            let r = pose.rotation.matrix();
            r * i * r.transpose()
        };
        body_coms[0] = base.transform_point(&model.base.com_offset);
        body_inertias[0] = world_inertia(base, &model.base.inertia);
        let mut mass_moment = body_coms[0] * model.base.mass;

        let mut parent = base * &model.mount;
        for (i, link) in model.links.iter().enumerate() {
            let joint = parent * link.origin;
            joint_axes[i] = joint.rotation * link.axis;
            joint_origins[i] = joint.translation;
            let frame = joint * Pose::new(axis_angle(&link.axis, q[i]), Vec3::zeros());
            body_coms[i + 1] = frame.transform_point(&link.body.com_offset);
            body_inertias[i + 1] = world_inertia(&frame, &link.body.inertia);
            mass_moment += body_coms[i + 1] * link.body.mass;
            links[i] = frame;
            parent = frame;
        }
        let ee = parent * model.tool;
        Self {
            base: *base,
            links,
            joint_axes,
            joint_origins,
            ee,
            body_coms,
            body_inertias,
            com: mass_moment / model.total_mass(),
        }
    }

    pub fn of_state(model: &SystemModel, state: &SystemState) -> Self {
        Self::compute(model, &state.base_pose(), &state.q)
    }
}

/// End-effector twist maps: `[v_e; ω_e] = base·ω_b + arm·q̇` with the base origin held.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    pub base: SMatrix<f64, 6, 3>,
    pub arm: Matrix6<f64>,
}

impl Jacobians {
    pub fn compute(kin: &Kinematics) -> Self {
        let p_ee = kin.ee.translation;
        let mut base = SMatrix::<f64, 6, 3>::zeros();
        base.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(-skew(&(p_ee - kin.base.translation))));
        base.fixed_view_mut::<3, 3>(3, 0).copy_from(&Mat3::identity());
        let mut arm = Matrix6::zeros();
        for j in 0..NUM_JOINTS {
            let z = kin.joint_axes[j];
            let v = z.cross(&(p_ee - kin.joint_origins[j]));
            arm.fixed_view_mut::<3, 1>(0, j).copy_from(&v);
            arm.fixed_view_mut::<3, 1>(3, j).copy_from(&z);
        }
        Self { base, arm }
    }
}

/// Convenience wrapper for the fixed-base arm: base at identity, origin at zero.
pub fn fixed_base_kinematics(model: &SystemModel, q: &JointVec) -> Kinematics {
    Kinematics::compute(model, &Pose::identity(), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodesic_angle, log_rotation, EulerZyx};
    use nalgebra::{Rotation3, Vector6};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    /// Independent evaluation of the UR5 chain from its DH table
    /// (d1, a2, a3, d4, d5, d6 and twists π/2, 0, 0, π/2, −π/2, 0).
    ///
    /// The URDF-form chain used by the model and the DH chain differ by
    /// constant frame conventions, so only the end-effector position is
    /// compared.
    fn dh_ee_position(q: &JointVec) -> Vec3 {
        let d = [0.089159, 0.0, 0.0, 0.10915, 0.09465, 0.0823];
        let a = [0.0, -0.425, -0.39225, 0.0, 0.0, 0.0];
        let alpha = [FRAC_PI_2, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0];
        let mut t = nalgebra::Matrix4::<f64>::identity();
        for i in 0..6 {
            let (ct, st) = (q[i].cos(), q[i].sin());
            let (ca, sa) = (alpha[i].cos(), alpha[i].sin());
            let step = nalgebra::Matrix4::new(
                ct, -st * ca, st * sa, a[i] * ct,
                st, ct * ca, -ct * sa, a[i] * st,
                0.0, sa, ca, d[i],
                0.0, 0.0, 0.0, 1.0,
            );
            t *= step;
        }
        Vec3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)])
    }

    fn random_q(rng: &mut impl Rng) -> JointVec {
        JointVec::from_fn(|_, _| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn urdf_chain_matches_dh_chain_up_to_base_yaw() {
        // The URDF description is the DH chain rotated by π about the base z axis.
        let model = SystemModel::ur5_on_cube();
        let flip = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::PI);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = random_q(&mut rng);
            let kin = Kinematics::compute(&model, &model.mount.inverse(), &q);
            let dh = flip * dh_ee_position(&q);
            assert!((kin.ee.translation - dh).norm() < 1e-9, "{} vs {}", kin.ee.translation, dh);
        }
    }

    #[test]
    fn rigid_base_rotation_moves_ee_rigidly() {
        let model = SystemModel::ur5_on_cube();
        let q = JointVec::new(0.3, -1.2, 1.0, -0.4, 0.7, 0.2);
        let p_base = Vec3::new(0.1, -0.2, 0.3);
        let k0 = Kinematics::compute(&model, &Pose::from_translation(p_base), &q);
        let rot = EulerZyx::new(0.2, -0.3, 0.5).to_matrix();
        let k1 = Kinematics::compute(&model, &Pose::new(rot, p_base), &q);
        let expected = rot * (k0.ee.translation - p_base) + p_base;
        assert!((k1.ee.translation - expected).norm() < 1e-12);
        assert!(geodesic_angle(&k1.ee.rotation, &(rot * k0.ee.rotation)) < 1e-7);
    }

    /// Finite-difference twist of the ee for a motion (ω_b, q̇) with the base origin held.
    fn fd_twist(model: &SystemModel, base: &Pose, q: &JointVec, wb: &Vec3, qd: &JointVec, h: f64) -> Vector6<f64> {
        let eval = |s: f64| {
            let rot = Rotation3::from_scaled_axis(wb * s) * base.rotation;
            Kinematics::compute(model, &Pose::new(rot, base.translation), &(q + qd * s)).ee
        };
        let plus = eval(h);
        let minus = eval(-h);
        let v = (plus.translation - minus.translation) / (2.0 * h);
        let w = log_rotation(&(plus.rotation * minus.rotation.inverse())) / (2.0 * h);
        Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z)
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let model = SystemModel::ur5_on_cube();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q = random_q(&mut rng);
            let base = Pose::new(
                Rotation3::from_scaled_axis(Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0))),
                Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            );
            let wb = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let qd = JointVec::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let kin = Kinematics::compute(&model, &base, &q);
            let jac = Jacobians::compute(&kin);
            let analytic = jac.base * wb + jac.arm * qd;
            let fd = fd_twist(&model, &base, &q, &wb, &qd, 1e-6);
            let rel = (analytic - fd).norm() / analytic.norm().max(1e-12);
            assert!(rel < 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn single_joint_columns_match_finite_differences() {
        let model = SystemModel::ur5_on_cube();
        let q = JointVec::new(0.1, -0.8, 1.3, 0.2, -0.5, 0.9);
        let kin = fixed_base_kinematics(&model, &q);
        let jac = Jacobians::compute(&kin);
        for j in 0..6 {
            let mut qd = JointVec::zeros();
            qd[j] = 1.0;
            let fd = fd_twist(&model, &Pose::identity(), &q, &Vec3::zeros(), &qd, 1e-6);
            let col = jac.arm.column(j).into_owned();
            assert!((col - fd).norm() < 1e-5);
        }
    }

    #[test]
    fn pure_base_spin_and_rest() {
        let model = SystemModel::ur5_on_cube();
        let q = JointVec::new(0.4, -1.0, 0.8, 0.1, 0.3, -0.2);
        let kin = fixed_base_kinematics(&model, &q);
        let jac = Jacobians::compute(&kin);
        let wb = Vec3::new(0.0, 0.0, 1.0);
        let twist = jac.base * wb;
        let expected_v = wb.cross(&(kin.ee.translation - kin.base.translation));
        assert!((twist.fixed_rows::<3>(0) - expected_v).norm() < 1e-15);
        assert_eq!(twist.fixed_rows::<3>(3).into_owned(), wb);
        let zero = jac.base * Vec3::zeros() + jac.arm * JointVec::zeros();
        assert_eq!(zero, Vector6::zeros());
    }

    #[test]
    fn com_is_mass_weighted_mean() {
        let model = SystemModel::ur5_on_cube();
        let kin = fixed_base_kinematics(&model, &JointVec::zeros());
        let masses: Vec<f64> = std::iter::once(model.base.mass)
            .chain(model.links.iter().map(|l| l.body.mass))
            .collect();
        let sum: Vec3 = kin.body_coms.iter().zip(&masses).map(|(c, m)| c * *m).sum();
        assert!((sum / masses.iter().sum::<f64>() - kin.com).norm() < 1e-15);
    }
}
