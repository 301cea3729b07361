//! Momentum bookkeeping for the free-floating system.
//!
//! Total angular momentum about the system CoM is linear in the base rate and
//! the joint rates, `H = A·ω_b + B·q̇`. `A` is the locked composite inertia of
//! the whole system about its CoM and `B` maps joint rates to the momentum the
//! arm carries; together they stand in for the base rows of the coupled
//! inertia matrix. Holding `H` fixed while the arm moves produces the reaction
//! of the base without assembling Coriolis terms explicitly.

use nalgebra::SMatrix;

use super::kinematics::Kinematics;
use super::model::{JointVec, SystemModel, NUM_JOINTS};
use crate::geometry::{skew, Mat3, Vec3};

pub type CouplingMatrix = SMatrix<f64, 3, NUM_JOINTS>;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumMaps {
    /// Locked rotational inertia about the system CoM (world frame).
    pub locked_inertia: Mat3,
    /// Joint-rate to angular-momentum coupling.
    pub coupling: CouplingMatrix,
    pub linear: LinearMomentumMap,
}

/// `P = M·v_b + omega·ω_b + joints·q̇`, where `v_b` is the base origin velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMomentumMap {
    pub total_mass: f64,
    pub omega: Mat3,
    pub joints: CouplingMatrix,
}

impl LinearMomentumMap {
    pub fn momentum(&self, v_base: &Vec3, omega_b: &Vec3, qdot: &JointVec) -> Vec3 {
        v_base * self.total_mass + self.omega * omega_b + self.joints * qdot
    }

    /// Base origin velocity that makes the total linear momentum vanish.
    pub fn zero_momentum_base_velocity(&self, omega_b: &Vec3, qdot: &JointVec) -> Vec3 {
        -(self.omega * omega_b + self.joints * qdot) / self.total_mass
    }
}

fn masses(model: &SystemModel) -> [f64; NUM_JOINTS + 1] {
    let mut m = [model.base.mass; NUM_JOINTS + 1];
    for (i, l) in model.links.iter().enumerate() {
        m[i + 1] = l.body.mass;
    }
    m
}

impl MomentumMaps {
    pub fn compute(model: &SystemModel, kin: &Kinematics) -> Self {
        let m = masses(model);
        let mut locked = Mat3::zeros();
        for b in 0..=NUM_JOINTS {
            let r = skew(&(kin.body_coms[b] - kin.com));
            locked += kin.body_inertias[b] - r * r * m[b];
        }

        let mut coupling = CouplingMatrix::zeros();
        let mut lin_joints = CouplingMatrix::zeros();
        for j in 0..NUM_JOINTS {
            let z = kin.joint_axes[j];
            let o = kin.joint_origins[j];
            let mut h = Vec3::zeros();
            let mut p = Vec3::zeros();
            // joint j moves bodies j+1.. (body index = link index + 1)
            for b in (j + 1)..=NUM_JOINTS {
                let v = z.cross(&(kin.body_coms[b] - o)) * m[b];
                h += kin.body_inertias[b] * z + (kin.body_coms[b] - kin.com).cross(&v);
                p += v;
            }
            coupling.set_column(j, &h);
            lin_joints.set_column(j, &p);
        }

        let total_mass = model.total_mass();
        let lever = (kin.com - kin.base.translation) * total_mass;
        Self {
            locked_inertia: locked,
            coupling,
            linear: LinearMomentumMap {
                total_mass,
                omega: -skew(&lever),
                joints: lin_joints,
            },
        }
    }

    pub fn angular_momentum(&self, omega_b: &Vec3, qdot: &JointVec) -> Vec3 {
        self.locked_inertia * omega_b + self.coupling * qdot
    }

    /// Base rate that carries momentum `h` given the joint rates.
    pub fn base_rate(&self, h: &Vec3, qdot: &JointVec) -> Option<Vec3> {
        self.locked_inertia
            .cholesky()
            .map(|c| c.solve(&(h - self.coupling * qdot)))
    }
}

/// Per-body velocities for a motion, with the base origin velocity chosen so
/// the total linear momentum is zero.
#[derive(Debug, Clone)]
pub struct BodyVelocities {
    pub base_linear: Vec3,
    pub angular: [Vec3; NUM_JOINTS + 1],
    pub com_linear: [Vec3; NUM_JOINTS + 1],
}

impl BodyVelocities {
    /// Direct propagation down the chain, independent of [`MomentumMaps`].
    pub fn propagate(model: &SystemModel, kin: &Kinematics, omega_b: &Vec3, qdot: &JointVec) -> Self {
        let relative = |v_base: &Vec3| {
            let mut angular = [Vec3::zeros(); NUM_JOINTS + 1];
            let mut com_linear = [Vec3::zeros(); NUM_JOINTS + 1];
            let mut w = *omega_b;
            angular[0] = w;
            com_linear[0] = v_base + omega_b.cross(&(kin.body_coms[0] - kin.base.translation));
            // velocity of the joint origin travels with the parent body
            let mut v_origin = *v_base;
            let mut origin = kin.base.translation;
            for j in 0..NUM_JOINTS {
                let o = kin.joint_origins[j];
                v_origin += w.cross(&(o - origin));
                origin = o;
                w += kin.joint_axes[j] * qdot[j];
                angular[j + 1] = w;
                com_linear[j + 1] = v_origin + w.cross(&(kin.body_coms[j + 1] - o));
            }
            (angular, com_linear)
        };
        let m = masses(model);
        let (_, held) = relative(&Vec3::zeros());
        let p: Vec3 = held.iter().zip(m).map(|(v, mi)| v * mi).sum();
        let base_linear = -p / model.total_mass();
        let (angular, com_linear) = relative(&base_linear);
        Self {
            base_linear,
            angular,
            com_linear,
        }
    }

    pub fn linear_momentum(&self, model: &SystemModel) -> Vec3 {
        self.com_linear
            .iter()
            .zip(masses(model))
            .map(|(v, m)| v * m)
            .sum()
    }

    /// `Σ Iᵢωᵢ + mᵢ rᵢ × vᵢ` about the system CoM.
    pub fn angular_momentum(&self, model: &SystemModel, kin: &Kinematics) -> Vec3 {
        let m = masses(model);
        (0..=NUM_JOINTS)
            .map(|b| {
                kin.body_inertias[b] * self.angular[b]
                    + (kin.body_coms[b] - kin.com).cross(&self.com_linear[b]) * m[b]
            })
            .sum()
    }
}
