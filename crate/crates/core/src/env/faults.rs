use rand::Rng;

use super::target::uniform_unit_vector;
use crate::geometry::Vec3;

/// Per-axis stored-momentum capacity of the attitude actuators (N·m·s).
pub const WHEEL_CAPACITY: f64 = 3.0;
/// Steps over which the initial observation bias decays to zero.
pub const BIAS_DECAY_STEPS: f64 = 30.0;
/// Disturbance impulses fire at a step drawn uniformly from this range.
pub const IMPULSE_STEPS: std::ops::RangeInclusive<u32> = 5..=25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impulse {
    /// Inertial-frame torque held for one control step.
    pub torque: Vec3,
    pub step: u32,
}

/// Fault and disturbance configuration of one episode. [`FaultState::nominal`]
/// leaves the environment equivalent to stepping the dynamics directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultState {
    pub obs_delay_prob: f64,
    pub act_delay_prob: f64,
    /// Retained fraction of the commanded base torque.
    pub eff_base: f64,
    /// Retained fraction of the commanded joint rates.
    pub eff_manip: f64,
    pub wheel_momentum: Vec3,
    pub wheel_capacity: f64,
    pub obs_bias_position: Vec3,
    pub obs_bias_angle: f64,
    pub obs_bias_axis: Vec3,
    pub impulse: Option<Impulse>,
}

impl Default for FaultState {
    fn default() -> Self {
        Self::nominal()
    }
}

impl FaultState {
    pub fn nominal() -> Self {
        Self {
            obs_delay_prob: 0.0,
            act_delay_prob: 0.0,
            eff_base: 1.0,
            eff_manip: 1.0,
            wheel_momentum: Vec3::zeros(),
            wheel_capacity: WHEEL_CAPACITY,
            obs_bias_position: Vec3::zeros(),
            obs_bias_angle: 0.0,
            obs_bias_axis: Vec3::x(),
            impulse: None,
        }
    }

    pub fn bias_decay(t: u32) -> f64 {
        (1.0 - t as f64 / BIAS_DECAY_STEPS).max(0.0)
    }

    /// Zeroes each torque component that would push its stored momentum past
    /// capacity, then accumulates the applied torque. Returns the applied
    /// torque and whether any component was cut.
    pub fn apply_wheel_limit(&mut self, requested: &Vec3, dt: f64) -> (Vec3, bool) {
        let mut applied = *requested;
        let mut clipped = false;
        for i in 0..3 {
            if (self.wheel_momentum[i] + applied[i] * dt).abs() > self.wheel_capacity {
                applied[i] = 0.0;
                clipped = true;
            }
        }
        self.wheel_momentum += applied * dt;
        (applied, clipped)
    }
}

/// Random quantities every episode draws up front, whether or not a fault
/// uses them, so that fault magnitudes never shift the random streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultDraws {
    pub impulse_step: u32,
    pub impulse_direction: Vec3,
    pub spin_axis: Vec3,
    pub bias_direction: Vec3,
    pub bias_axis: Vec3,
}

impl FaultDraws {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            impulse_step: rng.random_range(IMPULSE_STEPS),
            impulse_direction: uniform_unit_vector(rng),
            spin_axis: uniform_unit_vector(rng),
            bias_direction: uniform_unit_vector(rng),
            bias_axis: uniform_unit_vector(rng),
        }
    }
}

/// Everything a scenario may change about an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConditions {
    pub faults: FaultState,
    pub spin_rate: f64,
    pub spin_axis: Vec3,
    pub base_mass_scale: f64,
}

impl EpisodeConditions {
    pub fn nominal(draws: &FaultDraws) -> Self {
        Self {
            faults: FaultState::nominal(),
            spin_rate: 0.0,
            spin_axis: draws.spin_axis,
            base_mass_scale: 1.0,
        }
    }
}
