use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use spacearm_core::env::ActionPair;

/// Who produced an executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Policy,
    Prior,
}

/// Probability `p(k)` that the learned pair executes at update counter `k`:
/// linear from `p_start` to `p_end` over `k = 0..=k_g`, then 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceSchedule {
    pub k_g: u64,
    pub p_start: f64,
    pub p_end: f64,
}

impl GuidanceSchedule {
    pub fn new(k_g: u64) -> Self {
        Self {
            k_g,
            p_start: 0.3,
            p_end: 0.8,
        }
    }

    pub fn p(&self, k: u64) -> f64 {
        if k > self.k_g {
            1.0
        } else if self.k_g == 0 {
            self.p_start
        } else {
            self.p_start + (self.p_end - self.p_start) * k as f64 / self.k_g as f64
        }
    }
}

/// Mixes learned and prior actions during collection.
pub trait Guidance: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether the prior must be consulted at update counter `k`.
    fn active(&self, k: u64) -> bool;
    /// Chooses the executed pair given one uniform draw `zeta` for this step.
    fn combine(&self, k: u64, zeta: f64, drl: &ActionPair, prior: &ActionPair) -> (ActionPair, Source);
}

/// Timestep-level switching: one draw gates both agents together.
pub struct Tesg(pub GuidanceSchedule);

impl Guidance for Tesg {
    fn name(&self) -> &'static str {
        "tesg"
    }

    fn active(&self, k: u64) -> bool {
        self.0.p(k) < 1.0
    }

    fn combine(&self, k: u64, zeta: f64, drl: &ActionPair, prior: &ActionPair) -> (ActionPair, Source) {
        if zeta < self.0.p(k) {
            (*drl, Source::Policy)
        } else {
            (*prior, Source::Prior)
        }
    }
}

/// Pure learning, for ablations and the toy task.
pub struct NoGuidance;

impl Guidance for NoGuidance {
    fn name(&self) -> &'static str {
        "none"
    }

    fn active(&self, _k: u64) -> bool {
        false
    }

    fn combine(&self, _k: u64, _zeta: f64, drl: &ActionPair, _prior: &ActionPair) -> (ActionPair, Source) {
        (*drl, Source::Policy)
    }
}

/// `w·a_drl + (1−w)·a_prior` with `w = p(k)`. Blended actions are not policy
/// samples, so they are stored as prior-sourced.
pub struct LinearBlend(pub GuidanceSchedule);

impl Guidance for LinearBlend {
    fn name(&self) -> &'static str {
        "linear-blend"
    }

    fn active(&self, k: u64) -> bool {
        self.0.p(k) < 1.0
    }

    fn combine(&self, k: u64, _zeta: f64, drl: &ActionPair, prior: &ActionPair) -> (ActionPair, Source) {
        let w = self.0.p(k);
        if w >= 1.0 {
            return (*drl, Source::Policy);
        }
        let blended = ActionPair {
            arm: drl.arm * w + prior.arm * (1.0 - w),
            base: drl.base * w + prior.base * (1.0 - w),
        };
        (blended, Source::Prior)
    }
}

/// One TESG decision with its own draw.
pub fn tesg_select<R: Rng + ?Sized>(
    schedule: &GuidanceSchedule,
    k: u64,
    rng: &mut R,
    drl: &ActionPair,
    prior: &ActionPair,
) -> (ActionPair, Source) {
    Tesg(*schedule).combine(k, rng.random(), drl, prior)
}

pub type GuidanceFactory = Box<dyn Fn(GuidanceSchedule) -> Box<dyn Guidance> + Send + Sync>;

pub struct GuidanceRegistry {
    entries: BTreeMap<String, GuidanceFactory>,
}

impl Default for GuidanceRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl GuidanceRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("tesg", Box::new(|s| Box::new(Tesg(s))));
        r.register("none", Box::new(|_| Box::new(NoGuidance)));
        r.register("linear-blend", Box::new(|s| Box::new(LinearBlend(s))));
        r
    }

    pub fn register(&mut self, name: &str, factory: GuidanceFactory) {
        self.entries.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, schedule: GuidanceSchedule) -> Option<Box<dyn Guidance>> {
        self.entries.get(name).map(|f| f(schedule))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use spacearm_core::dynamics::JointVec;
    use spacearm_core::geometry::Vec3;
    use spacearm_core::rng::SimRng;

    fn pairs() -> (ActionPair, ActionPair) {
        let drl = ActionPair {
            arm: JointVec::repeat(1.0),
            base: Vec3::repeat(1.0),
        };
        (drl, ActionPair::default())
    }

    #[test]
    fn schedule_breakpoints() {
        let s = GuidanceSchedule::new(15);
        assert_eq!(s.p(0), 0.3);
        assert_eq!(s.p(15), 0.8);
        assert_eq!(s.p(16), 1.0);
        for k in 0..=20u64 {
            let expected = if k <= 15 { 0.3 + 0.5 * k as f64 / 15.0 } else { 1.0 };
            assert_eq!(s.p(k), expected, "k = {k}");
        }
    }

    #[test]
    fn switching_frequency_at_k6() {
        let s = GuidanceSchedule::new(15);
        let (drl, prior) = pairs();
        let mut rng = SimRng::seed_from_u64(6);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| tesg_select(&s, 6, &mut rng, &drl, &prior).1 == Source::Policy)
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((hits as f64 - 0.5 * n as f64).abs() < 3.0 * sigma, "{hits}");
    }

    #[test]
    fn after_guidance_the_prior_never_executes() {
        let g = Tesg(GuidanceSchedule::new(15));
        let (drl, prior) = pairs();
        assert!(!g.active(16));
        for zeta in [0.0, 0.5, 0.999_999] {
            assert_eq!(g.combine(16, zeta, &drl, &prior).1, Source::Policy);
        }
    }

    #[test]
    fn registry_builds_all_strategies() {
        let r = GuidanceRegistry::builtin();
        let names: Vec<_> = r.names().collect();
        assert_eq!(names, ["linear-blend", "none", "tesg"]);
        let (drl, prior) = pairs();
        let blend = r.build("linear-blend", GuidanceSchedule::new(15)).unwrap();
        let (a, src) = blend.combine(0, 0.0, &drl, &prior);
        assert!((a.arm[0] - 0.3).abs() < 1e-15);
        assert_eq!(src, Source::Prior);
        assert!(r.build("nope", GuidanceSchedule::new(1)).is_none());
    }
}
