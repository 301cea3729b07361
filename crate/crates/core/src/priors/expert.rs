use nalgebra::Rotation3;

use super::ik::{solve_ik, IkSettings};
use super::pid::{PidGains, PidState};
use super::rrt::{rrt_star_plan, RrtSettings};
use super::trajectory::{prior_manipulator_action, PriorTrajectory, SPEED_FRACTION};
use crate::env::{ActionPair, Controller, Env, Observation};
use crate::geometry::{log_rotation, EulerZyx, Vec3};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertSettings {
    pub ik: IkSettings,
    pub rrt: RrtSettings,
    pub pid: PidGains,
    /// Disable to leave the base uncontrolled (zero torque).
    pub base_control: bool,
}

impl Default for ExpertSettings {
    fn default() -> Self {
        Self {
            ik: IkSettings::default(),
            rrt: RrtSettings::default(),
            pid: PidGains::default(),
            base_control: true,
        }
    }
}

/// PID error (target minus current, roll/pitch/yaw) for holding the
/// episode-initial attitude. Falls back to the rotation vector near gimbal lock.
pub fn attitude_error(relative: &Rotation3<f64>) -> Vec3 {
    match EulerZyx::from_matrix(relative) {
        Ok(e) => -e.as_vector(),
        Err(_) => -log_rotation(relative),
    }
}

/// Plans once at episode start and tracks the plan; the base holds its
/// initial attitude. Without a reachable goal the arm stays still.
#[derive(Debug, Clone)]
pub struct ExpertController {
    pub settings: ExpertSettings,
    pid: PidState,
    traj: Option<PriorTrajectory>,
    /// Episodes whose planning failed since construction.
    pub fallbacks: usize,
}

impl ExpertController {
    pub fn new(settings: ExpertSettings) -> Self {
        Self {
            settings,
            pid: PidState::new(settings.pid),
            traj: None,
            fallbacks: 0,
        }
    }

    /// Same arm plan, base left uncontrolled.
    pub fn free_floating() -> Self {
        Self::new(ExpertSettings {
            base_control: false,
            ..ExpertSettings::default()
        })
    }

    pub fn trajectory(&self) -> Option<&PriorTrajectory> {
        self.traj.as_ref()
    }

    pub fn plan(&mut self, env: &Env<'_>, rng: &mut SimRng) {
        self.pid.reset();
        let model = env.model();
        let q0 = env.state().q;
        let target = env.state().base_pose().inverse() * env.target_pose();
        let horizon = env.horizon() as usize;
        let dt = env.config().dt;
        let speed = SPEED_FRACTION * model.velocity_limits().min();
        let planned = solve_ik(model, &target, &q0, &self.settings.ik, rng)
            .ok()
            .and_then(|goals| rrt_star_plan(&q0, &goals, &model.angle_limits(), &self.settings.rrt, rng).ok());
        self.traj = match planned {
            Some(out) => Some(PriorTrajectory::from_path(
                &out.path.densified(self.settings.rrt.step),
                speed,
                dt,
                horizon,
            )),
            None => {
                self.fallbacks += 1;
                log::debug!("expert planning failed; arm holds position");
                None
            }
        };
    }
}

impl Default for ExpertController {
    fn default() -> Self {
        Self::new(ExpertSettings::default())
    }
}

impl Controller for ExpertController {
    fn begin_episode(&mut self, env: &Env<'_>, rng: &mut SimRng) {
        self.plan(env, rng);
    }

    fn act(&mut self, env: &Env<'_>, _obs: &Observation, _rng: &mut SimRng) -> ActionPair {
        let state = env.state();
        let limit = env.model().velocity_limits().min();
        let arm = match &self.traj {
            Some(traj) => prior_manipulator_action(traj, &state.q, state.t as usize, limit),
            None => Default::default(),
        };
        let base = if self.settings.base_control {
            self.pid.step(&attitude_error(&env.relative_attitude()))
        } else {
            Vec3::zeros()
        };
        ActionPair { arm, base }
    }
}
