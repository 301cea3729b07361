//! The dual-agent episode: one agent commands joint rates, the other base
//! torques, both observe the shared simulated system.

mod faults;
mod observation;
pub mod reward;
pub mod scenario;
mod success;
mod target;
pub mod trace;

pub use faults::{
    EpisodeConditions, FaultDraws, FaultState, Impulse, BIAS_DECAY_STEPS, IMPULSE_STEPS, WHEEL_CAPACITY,
};
pub use observation::{arm_observation, base_observation, Observation, ARM_OBS_DIM, BASE_OBS_DIM};
pub use reward::{ArmSnapshot, BaseReward, BaseSnapshot, ManipulatorReward, RewardConfig};
pub use scenario::{Scenario, ScenarioRegistry};
pub use success::{arm_success, success_monitor, SuccessThresholds, TaskErrors};
pub use target::{sample_target, uniform_unit_quaternion, uniform_unit_vector, TargetSpec, Workspace};
pub use trace::{FaultFlags, StepRecord};

use nalgebra::Rotation3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, CommandInput, DynamicsError, JointVec, Kinematics, SystemModel, SystemState};
use crate::geometry::{axis_angle, geodesic_angle, EulerZyx, GeometryError, Pose, Vec3};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub horizon: u32,
    /// Control period (s).
    pub dt: f64,
    pub substeps: usize,
    /// Joint configuration every episode starts from.
    pub home_q: [f64; 6],
    pub workspace: Workspace,
    pub reward: RewardConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self {
            horizon: 50,
            dt: 0.1,
            substeps: 10,
            home_q: [0.0, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2, 0.0],
            workspace: Workspace::default(),
            reward: RewardConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon == 0 {
            return Err("env.horizon must be positive".into());
        }
        if !(self.dt > 0.0) || self.substeps == 0 {
            return Err("env.dt and env.substeps must be positive".into());
        }
        let ws = &self.workspace;
        if !(ws.inner_radius > 0.0 && ws.outer_radius > ws.inner_radius) {
            return Err("env.workspace radii must satisfy 0 < inner < outer".into());
        }
        self.reward.validate()
    }

    pub fn home_q(&self) -> JointVec {
        JointVec::from_row_slice(&self.home_q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("episode already reached its horizon")]
    EpisodeOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionPair {
    pub arm: JointVec,
    pub base: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward_m: ManipulatorReward,
    pub reward_b: BaseReward,
    pub errors: TaskErrors,
    pub record: StepRecord,
    pub done: bool,
}

pub struct Env<'a> {
    model: &'a SystemModel,
    cfg: &'a EnvConfig,
    horizon: u32,
    state: SystemState,
    initial_attitude: Rotation3<f64>,
    target: TargetSpec,
    faults: FaultState,
    fault_rng: SimRng,
    last_obs: Observation,
    last_executed: ActionPair,
    last_torque: Vec3,
    arm_prev: ArmSnapshot,
    base_prev: BaseSnapshot,
    errors: TaskErrors,
}

impl<'a> Env<'a> {
    /// Starts an episode at the home configuration, at rest.
    pub fn new(
        model: &'a SystemModel,
        cfg: &'a EnvConfig,
        target: TargetSpec,
        faults: FaultState,
        fault_rng: SimRng,
    ) -> Result<(Self, Observation), EnvError> {
        let state = SystemState::at_rest(cfg.home_q());
        Self::from_state(model, cfg, state, target, faults, fault_rng)
    }

    pub fn from_state(
        model: &'a SystemModel,
        cfg: &'a EnvConfig,
        state: SystemState,
        target: TargetSpec,
        faults: FaultState,
        fault_rng: SimRng,
    ) -> Result<(Self, Observation), EnvError> {
        let mut env = Self {
            model,
            cfg,
            horizon: cfg.horizon,
            initial_attitude: state.base_attitude.to_rotation_matrix(),
            state,
            target,
            faults,
            fault_rng,
            last_obs: Observation {
                arm: [0.0; ARM_OBS_DIM],
                base: [0.0; BASE_OBS_DIM],
            },
            last_executed: ActionPair::default(),
            last_torque: Vec3::zeros(),
            arm_prev: ArmSnapshot {
                e_pos: 0.0,
                e_ori: 0.0,
                qdot: JointVec::zeros(),
            },
            base_prev: BaseSnapshot {
                e_att: 0.0,
                euler: EulerZyx::default(),
            },
            errors: TaskErrors::default(),
        };
        let (arm, base, errors) = env.measure()?;
        env.arm_prev = arm;
        env.base_prev = base;
        env.errors = errors;
        env.last_obs = env.observe_true();
        let obs = env.last_obs;
        Ok((env, obs))
    }

    /// Extends the horizon, e.g. for post-reach maintenance replays.
    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn model(&self) -> &SystemModel {
        self.model
    }

    pub fn config(&self) -> &EnvConfig {
        self.cfg
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn faults(&self) -> &FaultState {
        &self.faults
    }

    pub fn errors(&self) -> TaskErrors {
        self.errors
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn t(&self) -> u32 {
        self.state.t
    }

    pub fn initial_attitude(&self) -> &Rotation3<f64> {
        &self.initial_attitude
    }

    pub fn elapsed(&self) -> f64 {
        self.state.t as f64 * self.cfg.dt
    }

    pub fn target_pose(&self) -> Pose {
        self.target.pose_at(self.elapsed())
    }

    pub fn ee_pose(&self) -> Pose {
        Kinematics::of_state(self.model, &self.state).ee
    }

    /// Base attitude relative to the episode-initial attitude.
    pub fn relative_attitude(&self) -> Rotation3<f64> {
        self.initial_attitude.inverse() * self.state.base_attitude.to_rotation_matrix()
    }

    fn measure(&self) -> Result<(ArmSnapshot, BaseSnapshot, TaskErrors), EnvError> {
        let ee = self.ee_pose();
        let target = self.target_pose();
        let rel = self.relative_attitude();
        let errors = TaskErrors {
            e_pos: (ee.translation - target.translation).norm(),
            e_ori: geodesic_angle(&ee.rotation, &target.rotation),
            e_att: geodesic_angle(&Rotation3::identity(), &rel),
        };
        let arm = ArmSnapshot {
            e_pos: errors.e_pos,
            e_ori: errors.e_ori,
            qdot: self.state.qdot,
        };
        let base = BaseSnapshot {
            e_att: errors.e_att,
            euler: EulerZyx::from_matrix(&rel)?,
        };
        Ok((arm, base, errors))
    }

    /// Target as perceived, including any decaying initial bias.
    fn perceived_target(&self) -> Pose {
        let mut target = self.target_pose();
        let decay = FaultState::bias_decay(self.state.t);
        if self.faults.obs_bias_position != Vec3::zeros() {
            target.translation += self.faults.obs_bias_position * decay;
        }
        if self.faults.obs_bias_angle != 0.0 {
            target.rotation = axis_angle(&self.faults.obs_bias_axis, self.faults.obs_bias_angle * decay) * target.rotation;
        }
        target
    }

    fn observe_true(&self) -> Observation {
        Observation {
            arm: arm_observation(&self.ee_pose(), &self.perceived_target(), &self.state.q, &self.state.qdot),
            base: base_observation(&self.relative_attitude(), &self.state.q, &self.state.qdot, &self.last_torque),
        }
    }

    pub fn step(&mut self, actions: &ActionPair) -> Result<StepOutcome, EnvError> {
        if self.state.t >= self.horizon {
            return Err(EnvError::EpisodeOver);
        }
        let t = self.state.t;
        // one draw per delay channel per step, used or not
        let act_draw: f64 = self.fault_rng.random();
        let obs_draw: f64 = self.fault_rng.random();

        let act_delayed = t >= 2 && act_draw < self.faults.act_delay_prob;
        let executed = if act_delayed { self.last_executed } else { *actions };
        let model = self.model;
        let qdot_cmd = model.clamp_joint_velocity(&executed.arm) * self.faults.eff_manip;
        let requested = model.clamp_base_torque(&executed.base) * self.faults.eff_base;
        let (tau_b, wheel_clipped) = self.faults.apply_wheel_limit(&requested, self.cfg.dt);
        let (tau_ext, impulse) = match self.faults.impulse {
            Some(imp) if imp.step == t => (imp.torque, true),
            _ => (Vec3::zeros(), false),
        };
        let cmd = CommandInput {
            qdot_cmd,
            tau_b,
            tau_ext,
        };
        self.state = dynamics::step(model, &self.state, &cmd, self.cfg.dt, self.cfg.substeps)?;
        self.last_executed = executed;
        self.last_torque = tau_b;

        let (arm, base, errors) = self.measure()?;
        let reward_m = reward::reward_manipulator(&self.arm_prev, &arm, &self.cfg.reward);
        let reward_b = reward::reward_base(&self.base_prev, &base, &self.cfg.reward);
        self.arm_prev = arm;
        self.base_prev = base;
        self.errors = errors;

        let obs_delayed = self.state.t >= 2 && obs_draw < self.faults.obs_delay_prob;
        if !obs_delayed {
            self.last_obs = self.observe_true();
        }
        let s = &self.state;
        let record = StepRecord {
            t: s.t,
            q: s.q.into(),
            qdot: s.qdot.into(),
            action_arm: executed.arm.into(),
            action_base: executed.base.into(),
            tau_applied: tau_b.into(),
            e_pos: errors.e_pos,
            e_ori: errors.e_ori,
            e_att: errors.e_att,
            r_m: reward_m.total,
            r_b: reward_b.total,
            flags: FaultFlags {
                obs_delayed,
                act_delayed,
                wheel_clipped,
                impulse,
            },
        };
        Ok(StepOutcome {
            obs: self.last_obs,
            reward_m,
            reward_b,
            errors,
            record,
            done: s.t >= self.horizon,
        })
    }
}

/// Anything that produces an action pair each step: learned policies, the
/// model-based expert, scripted baselines.
pub trait Controller {
    fn begin_episode(&mut self, _env: &Env<'_>, _rng: &mut SimRng) {}
    fn act(&mut self, env: &Env<'_>, obs: &Observation, rng: &mut SimRng) -> ActionPair;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<StepRecord>,
    pub errors: Vec<TaskErrors>,
    /// Set when the episode ended early (integrator blow-up, gimbal lock).
    pub failure: Option<EnvError>,
}

impl EpisodeTrace {
    pub fn is_complete(&self, horizon: u32) -> bool {
        self.failure.is_none() && self.records.len() == horizon as usize
    }
}

pub fn run_episode(env: &mut Env<'_>, first_obs: Observation, controller: &mut dyn Controller, rng: &mut SimRng) -> EpisodeTrace {
    controller.begin_episode(env, rng);
    let mut obs = first_obs;
    let mut trace = EpisodeTrace {
        records: Vec::with_capacity(env.horizon() as usize),
        errors: Vec::with_capacity(env.horizon() as usize),
        failure: None,
    };
    while env.t() < env.horizon() {
        let action = controller.act(env, &obs, rng);
        match env.step(&action) {
            Ok(out) => {
                trace.records.push(out.record);
                trace.errors.push(out.errors);
                obs = out.obs;
            }
            Err(e) => {
                log::warn!("episode aborted at step {}: {e}", env.t());
                trace.failure = Some(e);
                break;
            }
        }
    }
    trace
}
