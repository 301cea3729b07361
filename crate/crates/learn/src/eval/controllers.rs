use std::collections::BTreeMap;
use std::sync::Arc;

use spacearm_core::dynamics::JointVec;
use spacearm_core::env::{ActionPair, Controller, Env, Observation};
use spacearm_core::geometry::Vec3;
use spacearm_core::priors::ExpertController;
use spacearm_core::rng::SimRng;

use crate::nn::GaussianPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPair {
    pub arm: GaussianPolicy,
    pub base: GaussianPolicy,
}

impl PolicyPair {
    /// Chooses both actions; the mean when `deterministic`.
    pub fn act(&self, obs: &Observation, deterministic: bool, rng: &mut SimRng) -> ActionPair {
        let arm = self.arm.sample(&obs.arm, deterministic, rng).expect("arm observation width");
        let base = self.base.sample(&obs.base, deterministic, rng).expect("base observation width");
        ActionPair {
            arm: JointVec::from_column_slice(&arm.action),
            base: Vec3::from_column_slice(&base.action),
        }
    }
}

pub struct LearnedController {
    pub policies: Arc<PolicyPair>,
    pub deterministic: bool,
}

impl Controller for LearnedController {
    fn act(&mut self, _env: &Env<'_>, obs: &Observation, rng: &mut SimRng) -> ActionPair {
        self.policies.act(obs, self.deterministic, rng)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ControllerContext {
    pub policies: Option<Arc<PolicyPair>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("unknown controller {0:?}")]
    Unknown(String),
    #[error("controller {0:?} needs trained policies")]
    NeedsPolicies(String),
}

pub type BoxedController = Box<dyn Controller + Send>;
pub type ControllerFactory = Box<dyn Fn(&ControllerContext) -> Result<BoxedController, ControllerError> + Send + Sync>;

/// Named controller constructors, selected at run time.
pub struct ControllerRegistry {
    entries: BTreeMap<String, ControllerFactory>,
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// `learned` (deterministic trained policies), `expert` (RRT* + PID) and
    /// `free-float` (expert arm plan, no base torque).
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(
            "learned",
            Box::new(|ctx| match &ctx.policies {
                Some(p) => Ok(Box::new(LearnedController {
                    policies: Arc::clone(p),
                    deterministic: true,
                }) as BoxedController),
                None => Err(ControllerError::NeedsPolicies("learned".into())),
            }),
        );
        r.register("expert", Box::new(|_| Ok(Box::new(ExpertController::default()) as BoxedController)));
        r.register(
            "free-float",
            Box::new(|_| Ok(Box::new(ExpertController::free_floating()) as BoxedController)),
        );
        r
    }

    pub fn register(&mut self, name: &str, factory: ControllerFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, ctx: &ControllerContext) -> Result<BoxedController, ControllerError> {
        let f = self.entries.get(name).ok_or_else(|| ControllerError::Unknown(name.into()))?;
        f(ctx)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}
