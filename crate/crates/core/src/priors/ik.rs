//! Damped least-squares inverse kinematics for the fixed-base arm.

use nalgebra::{Matrix6, Vector6};
use rand::Rng;
use std::f64::consts::{PI, TAU};

use crate::dynamics::{fixed_base_kinematics, JointVec, Jacobians, SystemModel};
use crate::geometry::{geodesic_angle, log_rotation, Pose};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum IkError {
    #[error("no seed converged to the target pose")]
    NoSolution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSettings {
    pub seeds: usize,
    pub max_iterations: usize,
    pub damping: f64,
    /// Largest joint update per iteration (rad).
    pub max_step: f64,
    pub pos_tolerance: f64,
    pub ori_tolerance: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            seeds: 8,
            max_iterations: 150,
            damping: 0.05,
            max_step: 0.5,
            pos_tolerance: 1e-3,
            ori_tolerance: 1e-2,
        }
    }
}

/// End-effector pose error of `q` against `target`, base at identity.
pub fn fk_residual(model: &SystemModel, q: &JointVec, target: &Pose) -> (f64, f64) {
    let ee = fixed_base_kinematics(model, q).ee;
    (
        (ee.translation - target.translation).norm(),
        geodesic_angle(&ee.rotation, &target.rotation),
    )
}

fn refine(model: &SystemModel, seed: JointVec, target: &Pose, s: &IkSettings) -> Option<JointVec> {
    let mut q = seed;
    let lim = model.angle_limits();
    for _ in 0..s.max_iterations {
        let kin = fixed_base_kinematics(model, &q);
        let dp = target.translation - kin.ee.translation;
        let dr = log_rotation(&(target.rotation * kin.ee.rotation.inverse()));
        if dp.norm() < 1e-9 && dr.norm() < 1e-9 {
            break;
        }
        let err = Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z);
        let j = Jacobians::compute(&kin).arm;
        let jjt = j * j.transpose() + Matrix6::identity() * s.damping.powi(2);
        let mut dq = j.transpose() * jjt.cholesky()?.solve(&err);
        let n = dq.norm();
        if n > s.max_step {
            dq *= s.max_step / n;
        }
        q += dq;
        for i in 0..6 {
            q[i] = q[i].clamp(-lim[i], lim[i]);
        }
    }
    let (ep, eo) = fk_residual(model, &q, target);
    (ep <= s.pos_tolerance && eo <= s.ori_tolerance).then_some(q)
}

/// Shifts each joint by whole turns toward `reference`, staying in limits.
fn unwrap_toward(model: &SystemModel, q: &JointVec, reference: &JointVec) -> JointVec {
    let lim = model.angle_limits();
    let mut out = *q;
    for i in 0..6 {
        let k = ((reference[i] - q[i]) / TAU).round();
        let shifted = q[i] + k * TAU;
        if shifted.abs() <= lim[i] {
            out[i] = shifted;
        }
    }
    out
}

/// Solves for joint configurations reaching `target` (base frame). The first
/// seed is `hint`, the rest are uniform in [−π, π]. Solutions are unwrapped
/// toward `hint` and near-duplicates dropped.
pub fn solve_ik<R: Rng + ?Sized>(
    model: &SystemModel,
    target: &Pose,
    hint: &JointVec,
    settings: &IkSettings,
    rng: &mut R,
) -> Result<Vec<JointVec>, IkError> {
    let mut solutions: Vec<JointVec> = Vec::new();
    for k in 0..settings.seeds {
        let seed = if k == 0 {
            *hint
        } else {
            JointVec::from_fn(|_, _| rng.random_range(-PI..PI))
        };
        if let Some(q) = refine(model, seed, target, settings) {
            let q = unwrap_toward(model, &q, hint);
            if solutions.iter().all(|s| (s - q).norm() > 1e-3) {
                solutions.push(q);
            }
        }
    }
    if solutions.is_empty() {
        Err(IkError::NoSolution)
    } else {
        Ok(solutions)
    }
}
