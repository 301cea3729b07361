use nalgebra::Rotation3;

use crate::dynamics::JointVec;
use crate::geometry::{geodesic_angle, Pose, Rot6d, Vec3};

pub const ARM_OBS_DIM: usize = 41;
pub const BASE_OBS_DIM: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub arm: [f64; ARM_OBS_DIM],
    pub base: [f64; BASE_OBS_DIM],
}

/// `[CPR_ee, CPR_tar, CPR_err, e_pos, e_ori, q, q̇]`, with `CPR_err` the pose of
/// the target seen from the end-effector.
pub fn arm_observation(ee: &Pose, target: &Pose, q: &JointVec, qdot: &JointVec) -> [f64; ARM_OBS_DIM] {
    let mut o = [0.0; ARM_OBS_DIM];
    o[0..9].copy_from_slice(&ee.encode_cpr());
    o[9..18].copy_from_slice(&target.encode_cpr());
    o[18..27].copy_from_slice(&(ee.inverse() * *target).encode_cpr());
    o[27] = (ee.translation - target.translation).norm();
    o[28] = geodesic_angle(&ee.rotation, &target.rotation);
    o[29..35].copy_from_slice(q.as_slice());
    o[35..41].copy_from_slice(qdot.as_slice());
    o
}

/// `[CRR_b, q₁:₃, q̇₁:₃, τ_prev]`; `relative_attitude` is measured from the
/// episode-initial attitude.
pub fn base_observation(
    relative_attitude: &Rotation3<f64>,
    q: &JointVec,
    qdot: &JointVec,
    prev_torque: &Vec3,
) -> [f64; BASE_OBS_DIM] {
    let mut o = [0.0; BASE_OBS_DIM];
    o[0..6].copy_from_slice(&Rot6d::encode(relative_attitude).0);
    o[6..9].copy_from_slice(&q.as_slice()[0..3]);
    o[9..12].copy_from_slice(&qdot.as_slice()[0..3]);
    o[12..15].copy_from_slice(prev_torque.as_slice());
    o
}
