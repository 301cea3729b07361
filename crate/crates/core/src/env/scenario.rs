//! Named fault scenarios for robustness campaigns.
//!
//! Each scenario maps one scalar magnitude onto [`EpisodeConditions`]. A
//! magnitude of zero always reproduces the nominal conditions exactly.

use std::collections::BTreeMap;

use super::faults::{EpisodeConditions, FaultDraws, Impulse};

pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    /// Unit of the magnitude axis, for result files.
    fn unit(&self) -> &'static str;
    fn validate(&self, magnitude: f64) -> Result<(), String> {
        if magnitude.is_finite() && magnitude >= 0.0 {
            Ok(())
        } else {
            Err(format!("{}: magnitude must be a non-negative number, got {magnitude}", self.name()))
        }
    }
    fn apply(&self, magnitude: f64, draws: &FaultDraws, conditions: &mut EpisodeConditions);
}

fn unit_interval(name: &str, m: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&m) {
        Ok(())
    } else {
        Err(format!("{name}: magnitude must lie in [0, 1], got {m}"))
    }
}

struct TargetSpin;
impl Scenario for TargetSpin {
    fn name(&self) -> &'static str {
        "spin"
    }
    fn unit(&self) -> &'static str {
        "rad/s"
    }
    fn apply(&self, m: f64, draws: &FaultDraws, c: &mut EpisodeConditions) {
        c.spin_rate = m;
        c.spin_axis = draws.spin_axis;
    }
}

struct BaseImpulse;
impl Scenario for BaseImpulse {
    fn name(&self) -> &'static str {
        "base-impulse"
    }
    fn unit(&self) -> &'static str {
        "N·m"
    }
    fn apply(&self, m: f64, draws: &FaultDraws, c: &mut EpisodeConditions) {
        if m > 0.0 {
            c.faults.impulse = Some(Impulse {
                torque: draws.impulse_direction * m,
                step: draws.impulse_step,
            });
        }
    }
}

struct ObservationDelay;
impl Scenario for ObservationDelay {
    fn name(&self) -> &'static str {
        "obs-delay"
    }
    fn unit(&self) -> &'static str {
        "probability"
    }
    fn validate(&self, m: f64) -> Result<(), String> {
        unit_interval(self.name(), m)
    }
    fn apply(&self, m: f64, _: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.obs_delay_prob = m;
    }
}

struct ActionDelay;
impl Scenario for ActionDelay {
    fn name(&self) -> &'static str {
        "act-delay"
    }
    fn unit(&self) -> &'static str {
        "probability"
    }
    fn validate(&self, m: f64) -> Result<(), String> {
        unit_interval(self.name(), m)
    }
    fn apply(&self, m: f64, _: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.act_delay_prob = m;
    }
}

struct BaseEfficiencyLoss;
impl Scenario for BaseEfficiencyLoss {
    fn name(&self) -> &'static str {
        "eff-base"
    }
    fn unit(&self) -> &'static str {
        "lost fraction"
    }
    fn validate(&self, m: f64) -> Result<(), String> {
        unit_interval(self.name(), m)
    }
    fn apply(&self, m: f64, _: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.eff_base = 1.0 - m;
    }
}

struct ManipulatorEfficiencyLoss;
impl Scenario for ManipulatorEfficiencyLoss {
    fn name(&self) -> &'static str {
        "eff-manip"
    }
    fn unit(&self) -> &'static str {
        "lost fraction"
    }
    fn validate(&self, m: f64) -> Result<(), String> {
        unit_interval(self.name(), m)
    }
    fn apply(&self, m: f64, _: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.eff_manip = 1.0 - m;
    }
}

/// Fraction of the stored-momentum capacity already used up; the remaining
/// headroom is `(1 − m)·capacity` per axis.
struct MomentumSaturation;
impl Scenario for MomentumSaturation {
    fn name(&self) -> &'static str {
        "momentum-sat"
    }
    fn unit(&self) -> &'static str {
        "saturated fraction"
    }
    fn validate(&self, m: f64) -> Result<(), String> {
        unit_interval(self.name(), m)
    }
    fn apply(&self, m: f64, _: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.wheel_capacity *= 1.0 - m;
    }
}

/// Relative increase of the base mass and inertia.
struct BaseMass;
impl Scenario for BaseMass {
    fn name(&self) -> &'static str {
        "base-mass"
    }
    fn unit(&self) -> &'static str {
        "relative change"
    }
    fn validate(&self, m: f64) -> Result<(), String> {
        if m.is_finite() && m > -1.0 {
            Ok(())
        } else {
            Err(format!("base-mass: relative change must exceed -1, got {m}"))
        }
    }
    fn apply(&self, m: f64, _: &FaultDraws, c: &mut EpisodeConditions) {
        c.base_mass_scale = 1.0 + m;
    }
}

struct PositionBias;
impl Scenario for PositionBias {
    fn name(&self) -> &'static str {
        "obs-bias-pos"
    }
    fn unit(&self) -> &'static str {
        "m"
    }
    fn apply(&self, m: f64, draws: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.obs_bias_position = draws.bias_direction * m;
    }
}

struct OrientationBias;
impl Scenario for OrientationBias {
    fn name(&self) -> &'static str {
        "obs-bias-ori"
    }
    fn unit(&self) -> &'static str {
        "rad"
    }
    fn apply(&self, m: f64, draws: &FaultDraws, c: &mut EpisodeConditions) {
        c.faults.obs_bias_angle = m;
        c.faults.obs_bias_axis = draws.bias_axis;
    }
}

pub struct ScenarioRegistry {
    entries: BTreeMap<&'static str, Box<dyn Scenario>>,
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(TargetSpin));
        r.register(Box::new(BaseImpulse));
        r.register(Box::new(ObservationDelay));
        r.register(Box::new(ActionDelay));
        r.register(Box::new(BaseEfficiencyLoss));
        r.register(Box::new(ManipulatorEfficiencyLoss));
        r.register(Box::new(MomentumSaturation));
        r.register(Box::new(BaseMass));
        r.register(Box::new(PositionBias));
        r.register(Box::new(OrientationBias));
        r
    }

    /// Replaces any scenario already registered under the same name.
    pub fn register(&mut self, scenario: Box<dyn Scenario>) {
        self.entries.insert(scenario.name(), scenario);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Scenario> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}
