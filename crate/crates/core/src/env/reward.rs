use serde::{Deserialize, Serialize};

use crate::dynamics::JointVec;
use crate::geometry::EulerZyx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub k_pos: f64,
    pub k_ori: f64,
    pub k_smth: f64,
    /// Joint-rate change tolerated per step before the smoothness penalty applies (rad/s).
    pub qdot_tolerance: f64,
    pub k_aln: f64,
    pub k_done_m: f64,
    pub eps_pos: f64,
    pub eps_ori: f64,
    pub k_att: f64,
    pub k_var: f64,
    pub k_done_b: f64,
    pub eps_att: f64,
    /// Reward only orientation-error decrease instead of any change.
    pub aln_signed: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            k_pos: 0.5,
            k_ori: 0.125,
            k_smth: 0.1,
            qdot_tolerance: 2.0,
            k_aln: 0.15,
            k_done_m: 0.1,
            eps_pos: 0.05,
            eps_ori: 0.1,
            k_att: 2.5,
            k_var: 2.5,
            k_done_b: 0.2,
            eps_att: 0.05,
            aln_signed: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        let weights = [
            ("k_pos", self.k_pos),
            ("k_ori", self.k_ori),
            ("k_smth", self.k_smth),
            ("qdot_tolerance", self.qdot_tolerance),
            ("k_aln", self.k_aln),
            ("k_done_m", self.k_done_m),
            ("k_att", self.k_att),
            ("k_var", self.k_var),
            ("k_done_b", self.k_done_b),
        ];
        for (name, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("reward.{name} must be a non-negative number, got {v}"));
            }
        }
        for (name, v) in [("eps_pos", self.eps_pos), ("eps_ori", self.eps_ori), ("eps_att", self.eps_att)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("reward.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Arm quantities one reward evaluation needs from a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSnapshot {
    pub e_pos: f64,
    pub e_ori: f64,
    pub qdot: JointVec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseSnapshot {
    pub e_att: f64,
    /// Attitude relative to the episode-initial attitude.
    pub euler: EulerZyx,
}

/// Signed contributions; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManipulatorReward {
    pub pose: f64,
    pub smoothness: f64,
    pub alignment: f64,
    pub completion: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BaseReward {
    pub attitude: f64,
    pub variation: f64,
    pub completion: f64,
    pub total: f64,
}

pub fn pose_penalty(e_pos: f64, e_ori: f64, cfg: &RewardConfig) -> f64 {
    cfg.k_pos * e_pos + cfg.k_ori * e_ori
}

pub fn smoothness_penalty(prev: &JointVec, cur: &JointVec, cfg: &RewardConfig) -> f64 {
    let excess: f64 = prev
        .iter()
        .zip(cur.iter())
        .map(|(a, b)| ((b - a).abs() - cfg.qdot_tolerance).max(0.0))
        .sum();
    cfg.k_smth * excess
}

pub fn alignment_reward(prev_e_ori: f64, e_ori: f64, cfg: &RewardConfig) -> f64 {
    let change = prev_e_ori - e_ori;
    if cfg.aln_signed {
        cfg.k_aln * change.max(0.0)
    } else {
        cfg.k_aln * change.abs().max(0.0)
    }
}

pub fn manipulator_completion(e_pos: f64, e_ori: f64, cfg: &RewardConfig) -> f64 {
    cfg.k_done_m
        * (((cfg.eps_pos - e_pos) / cfg.eps_pos).max(0.0) + ((cfg.eps_ori - e_ori) / cfg.eps_ori).max(0.0))
}

pub fn reward_manipulator(prev: &ArmSnapshot, cur: &ArmSnapshot, cfg: &RewardConfig) -> ManipulatorReward {
    let pose = -pose_penalty(cur.e_pos, cur.e_ori, cfg);
    let smoothness = -smoothness_penalty(&prev.qdot, &cur.qdot, cfg);
    let alignment = alignment_reward(prev.e_ori, cur.e_ori, cfg);
    let completion = manipulator_completion(cur.e_pos, cur.e_ori, cfg);
    ManipulatorReward {
        pose,
        smoothness,
        alignment,
        completion,
        total: pose + smoothness + alignment + completion,
    }
}

/// Reduction in the L1 norm of the Euler angles, `‖Φ_prev‖₁ − ‖Φ_cur‖₁`.
pub fn euler_l1_reduction(prev: &EulerZyx, cur: &EulerZyx) -> f64 {
    prev.l1_norm() - cur.l1_norm()
}

pub fn reward_base(prev: &BaseSnapshot, cur: &BaseSnapshot, cfg: &RewardConfig) -> BaseReward {
    let attitude = -cfg.k_att * cur.e_att;
    let variation = cfg.k_var * ((prev.e_att - cur.e_att) + euler_l1_reduction(&prev.euler, &cur.euler));
    let completion = cfg.k_done_b * ((cfg.eps_att - cur.e_att) / cfg.eps_att).max(0.0);
    BaseReward {
        attitude,
        variation,
        completion,
        total: attitude + variation + completion,
    }
}
