use std::borrow::Cow;

use rayon::prelude::*;
use spacearm_core::dynamics::SystemModel;
use spacearm_core::env::{
    run_episode, sample_target, Env, EnvConfig, EpisodeConditions, EpisodeTrace, FaultDraws, Scenario, SuccessThresholds,
};
use spacearm_core::rng::{self, substream};

use super::controllers::{ControllerContext, ControllerError, ControllerRegistry};
use super::metrics::{episode_metrics, EpisodeMetrics};

/// One evaluation batch: `episodes` independent episodes whose random
/// streams depend only on `(seed, stream, episode index)`.
#[derive(Clone, Copy)]
pub struct EvalSpec<'a> {
    pub model: &'a SystemModel,
    pub env: &'a EnvConfig,
    pub thresholds: SuccessThresholds,
    pub episodes: usize,
    pub seed: u64,
    /// Top-level substream, e.g. [`rng::EVAL`] or [`rng::SCENARIO`].
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub trace: EpisodeTrace,
    /// `None` when the episode aborted before the horizon.
    pub metrics: Option<EpisodeMetrics>,
}

pub type ActiveFault<'a> = Option<(&'a dyn Scenario, f64)>;

/// Builds the episode's conditions and runs it. A `None` fault and a
/// zero-magnitude fault go through identical code.
pub fn run_one(
    spec: &EvalSpec<'_>,
    controller: &str,
    registry: &ControllerRegistry,
    ctx: &ControllerContext,
    fault: ActiveFault<'_>,
    index: usize,
    horizon: Option<u32>,
) -> Result<EpisodeOutcome, ControllerError> {
    let i = index as u64;
    let mut fault_rng = substream(spec.seed, &[spec.stream, i, rng::FAULT]);
    let draws = FaultDraws::draw(&mut fault_rng);
    let mut cond = EpisodeConditions::nominal(&draws);
    if let Some((scenario, magnitude)) = fault {
        scenario.apply(magnitude, &draws, &mut cond);
    }
    let model: Cow<'_, SystemModel> = if cond.base_mass_scale == 1.0 {
        Cow::Borrowed(spec.model)
    } else {
        Cow::Owned(spec.model.with_base_mass_scale(cond.base_mass_scale))
    };
    let mut target = sample_target(&model.mount, &spec.env.workspace, &mut substream(spec.seed, &[spec.stream, i, rng::TARGET]));
    target.spin_rate = cond.spin_rate;
    target.spin_axis = cond.spin_axis;

    let mut controller = registry.build(controller, ctx)?;
    let mut policy_rng = substream(spec.seed, &[spec.stream, i, rng::POLICY]);
    let trace = match Env::new(&model, spec.env, target, cond.faults, fault_rng) {
        Ok((env, obs)) => {
            let mut env = match horizon {
                Some(h) => env.with_horizon(h),
                None => env,
            };
            run_episode(&mut env, obs, controller.as_mut(), &mut policy_rng)
        }
        Err(e) => EpisodeTrace {
            records: Vec::new(),
            errors: Vec::new(),
            failure: Some(e),
        },
    };
    let h = horizon.unwrap_or(spec.env.horizon) as usize;
    let metrics = if trace.failure.is_none() {
        episode_metrics(&trace.errors, h, &spec.thresholds).ok()
    } else {
        None
    };
    Ok(EpisodeOutcome { trace, metrics })
}

/// Runs all episodes of `spec` in parallel, returned in episode order.
pub fn evaluate(
    spec: &EvalSpec<'_>,
    controller: &str,
    registry: &ControllerRegistry,
    ctx: &ControllerContext,
    fault: ActiveFault<'_>,
) -> Result<Vec<EpisodeOutcome>, ControllerError> {
    if !registry.contains(controller) {
        return Err(ControllerError::Unknown(controller.into()));
    }
    (0..spec.episodes)
        .into_par_iter()
        .map(|i| run_one(spec, controller, registry, ctx, fault, i, None))
        .collect()
}

pub fn metrics_of(outcomes: &[EpisodeOutcome]) -> Vec<Option<EpisodeMetrics>> {
    outcomes.iter().map(|o| o.metrics).collect()
}

/// Single episode with an extended horizon, for post-reach attitude
/// maintenance plots.
pub fn maintenance_replay(
    spec: &EvalSpec<'_>,
    controller: &str,
    registry: &ControllerRegistry,
    ctx: &ControllerContext,
    episode: usize,
    horizon: u32,
) -> Result<EpisodeOutcome, ControllerError> {
    run_one(spec, controller, registry, ctx, None, episode, Some(horizon))
}
