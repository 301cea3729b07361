use rayon::prelude::*;
use spacearm_core::dynamics::{JointVec, SystemModel};
use spacearm_core::env::reward::reward_manipulator;
use spacearm_core::env::{
    arm_observation, arm_success, sample_target, ActionPair, ArmSnapshot, Controller, Env, EnvConfig, EpisodeConditions,
    FaultDraws, Observation, SuccessThresholds, TargetSpec, TaskErrors, ARM_OBS_DIM, BASE_OBS_DIM,
};
use spacearm_core::geometry::{geodesic_angle, Pose, Vec3};
use spacearm_core::priors::ExpertController;
use spacearm_core::rng::{self, substream};

use super::buffer::{AgentBuffer, EpisodeData};
use super::guidance::{Guidance, Source};
use crate::eval::PolicyPair;
use crate::nn::GaussianPolicy;

/// Everything that fixes one epoch's rollouts besides the policies.
pub struct CollectSpec<'a> {
    pub model: &'a SystemModel,
    pub env: &'a EnvConfig,
    pub thresholds: SuccessThresholds,
    pub guidance: &'a dyn Guidance,
    /// Update counter for the guidance schedule.
    pub k: u64,
    /// 1-based epoch, also the random stream index.
    pub epoch: u64,
    pub relabel: bool,
    pub episodes: usize,
    pub seed: u64,
}

/// Arm-side quantities per visited state, enough to recompute observations
/// and rewards for another goal.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPath {
    pub ee: Vec<Pose>,
    pub q: Vec<JointVec>,
    pub qdot: Vec<JointVec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub index: usize,
    pub arm: EpisodeData,
    pub base: EpisodeData,
    /// Executed physical actions, for exact replays.
    pub actions: Vec<ActionPair>,
    pub errors: Vec<TaskErrors>,
    pub path: ArmPath,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollectStats {
    pub episodes: usize,
    pub dropped: usize,
    pub relabeled: usize,
    pub prior_steps: usize,
    pub steps: usize,
    /// Rollouts meeting the full success criterion.
    pub successes: usize,
    pub return_arm: f64,
    pub return_base: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CollectError {
    #[error("{dropped} of {attempted} episodes diverged; giving up on epoch {epoch}")]
    TooManyDropped { epoch: u64, dropped: usize, attempted: usize },
}

fn empty_episode(obs_dim: usize, act_dim: usize, horizon: usize) -> EpisodeData {
    EpisodeData {
        obs: Vec::with_capacity(horizon * obs_dim),
        u: Vec::with_capacity(horizon * act_dim),
        logp: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        sources: Vec::with_capacity(horizon),
        final_obs: Vec::new(),
        terminal: false,
    }
}

/// Records the executed action for one agent: the sample itself when the
/// policy acted, otherwise the prior action re-expressed in normalized units
/// and scored under the same policy.
fn store(ep: &mut EpisodeData, policy: &GaussianPolicy, obs: &[f64], sample_u: &[f64], sample_logp: f64, executed: &[f64], src: Source) {
    ep.obs.extend_from_slice(obs);
    match src {
        Source::Policy => {
            ep.u.extend_from_slice(sample_u);
            ep.logp.push(sample_logp);
        }
        Source::Prior => {
            let u = policy.to_normalized(executed);
            ep.logp.push(policy.log_prob(obs, &u).expect("observation width"));
            ep.u.extend(u);
        }
    }
    ep.sources.push(src);
}

/// Runs one training episode; `None` if the simulation diverged.
pub fn rollout(spec: &CollectSpec<'_>, policies: &PolicyPair, index: usize) -> Option<Rollout> {
    let path = [rng::TRAIN, spec.epoch, index as u64];
    let sub = |leaf: u64| substream(spec.seed, &[path[0], path[1], path[2], leaf]);
    let mut fault_rng = sub(rng::FAULT);
    let draws = FaultDraws::draw(&mut fault_rng);
    let cond = EpisodeConditions::nominal(&draws);
    let target = sample_target(&spec.model.mount, &spec.env.workspace, &mut sub(rng::TARGET));
    let (mut env, mut obs) = Env::new(spec.model, spec.env, target, cond.faults, fault_rng).ok()?;

    let mut policy_rng = sub(rng::POLICY);
    let mut guide_rng = sub(rng::GUIDANCE);
    let mut planner_rng = sub(rng::PLANNER);
    let guided = spec.guidance.active(spec.k);
    let mut prior = ExpertController::default();
    if guided {
        prior.begin_episode(&env, &mut planner_rng);
    }

    let h = env.horizon() as usize;
    let mut arm = empty_episode(ARM_OBS_DIM, policies.arm.act_dim(), h);
    let mut base = empty_episode(BASE_OBS_DIM, policies.base.act_dim(), h);
    let mut actions = Vec::with_capacity(h);
    let mut errors = Vec::with_capacity(h);
    let mut arm_path = ArmPath {
        ee: vec![env.ee_pose()],
        q: vec![env.state().q],
        qdot: vec![env.state().qdot],
    };
    while env.t() < env.horizon() {
        let sa = policies.arm.sample(&obs.arm, false, &mut policy_rng).expect("arm observation width");
        let sb = policies.base.sample(&obs.base, false, &mut policy_rng).expect("base observation width");
        let drl = ActionPair {
            arm: JointVec::from_column_slice(&sa.action),
            base: Vec3::from_column_slice(&sb.action),
        };
        let zeta: f64 = rand::Rng::random(&mut guide_rng);
        let (executed, src) = if guided {
            let p = prior.act(&env, &obs, &mut planner_rng);
            spec.guidance.combine(spec.k, zeta, &drl, &p)
        } else {
            (drl, Source::Policy)
        };
        store(&mut arm, &policies.arm, &obs.arm, &sa.u, sa.log_prob, executed.arm.as_slice(), src);
        store(&mut base, &policies.base, &obs.base, &sb.u, sb.log_prob, executed.base.as_slice(), src);

        let out = env.step(&executed).ok()?;
        if !env.state().is_finite() || !out.reward_m.total.is_finite() || !out.reward_b.total.is_finite() {
            return None;
        }
        arm.rewards.push(out.reward_m.total);
        base.rewards.push(out.reward_b.total);
        actions.push(executed);
        errors.push(out.errors);
        arm_path.ee.push(env.ee_pose());
        arm_path.q.push(env.state().q);
        arm_path.qdot.push(env.state().qdot);
        obs = out.obs;
    }
    let Observation { arm: fa, base: fb } = obs;
    arm.final_obs = fa.to_vec();
    base.final_obs = fb.to_vec();
    Some(Rollout {
        index,
        arm,
        base,
        actions,
        errors,
        path: arm_path,
        target,
    })
}

/// Copy of the arm episode with the goal moved to the final achieved
/// end-effector pose. Observations, rewards and stored log-densities are
/// recomputed; executed actions and sources are kept.
pub fn her_relabel(episode: &EpisodeData, path: &ArmPath, env: &EnvConfig, policy: &GaussianPolicy) -> EpisodeData {
    let goal = *path.ee.last().expect("non-empty path");
    let n = episode.len();
    let snapshot = |t: usize| ArmSnapshot {
        e_pos: (path.ee[t].translation - goal.translation).norm(),
        e_ori: geodesic_angle(&path.ee[t].rotation, &goal.rotation),
        qdot: path.qdot[t],
    };
    let obs_at = |t: usize| arm_observation(&path.ee[t], &goal, &path.q[t], &path.qdot[t]);
    let d = policy.act_dim();
    let mut out = empty_episode(ARM_OBS_DIM, d, n);
    let mut prev = snapshot(0);
    for t in 0..n {
        let o = obs_at(t);
        let u = &episode.u[t * d..(t + 1) * d];
        out.obs.extend_from_slice(&o);
        out.u.extend_from_slice(u);
        out.logp.push(policy.log_prob(&o, u).expect("arm observation width"));
        out.sources.push(episode.sources[t]);
        let cur = snapshot(t + 1);
        out.rewards.push(reward_manipulator(&prev, &cur, &env.reward).total);
        prev = cur;
    }
    out.final_obs = obs_at(n).to_vec();
    out.terminal = episode.terminal;
    out
}

/// Fills both buffers with `spec.episodes` valid episodes (plus relabeled
/// arm copies). Diverged episodes are replaced by the next indices so the
/// result only depends on the seed.
pub fn collect_epoch(
    spec: &CollectSpec<'_>,
    policies: &PolicyPair,
    arm_buf: &mut AgentBuffer,
    base_buf: &mut AgentBuffer,
) -> Result<CollectStats, CollectError> {
    assert!(arm_buf.is_empty() && base_buf.is_empty(), "buffers must be flushed before collection");
    let mut stats = CollectStats::default();
    let mut next = 0usize;
    while stats.episodes < spec.episodes {
        let want = spec.episodes - stats.episodes;
        if stats.dropped > spec.episodes.max(10) {
            return Err(CollectError::TooManyDropped {
                epoch: spec.epoch,
                dropped: stats.dropped,
                attempted: next,
            });
        }
        let batch: Vec<(usize, Option<Rollout>)> =
            (next..next + want).into_par_iter().map(|i| (i, rollout(spec, policies, i))).collect();
        next += want;
        for (i, r) in batch {
            let Some(r) = r else {
                log::warn!("epoch {} episode {i} diverged; dropped", spec.epoch);
                stats.dropped += 1;
                continue;
            };
            stats.episodes += 1;
            stats.steps += r.arm.len();
            stats.prior_steps += r.arm.sources.iter().filter(|&&s| s == Source::Prior).count();
            stats.return_arm += r.arm.rewards.iter().sum::<f64>();
            stats.return_base += r.base.rewards.iter().sum::<f64>();
            if spacearm_core::env::success_monitor(&r.errors, &spec.thresholds) {
                stats.successes += 1;
            }
            let relabeled = (spec.relabel && !arm_success(&r.errors, &spec.thresholds))
                .then(|| her_relabel(&r.arm, &r.path, spec.env, &policies.arm));
            arm_buf.push(r.arm);
            base_buf.push(r.base);
            if let Some(ep) = relabeled {
                arm_buf.push(ep);
                stats.relabeled += 1;
            }
        }
    }
    if stats.episodes > 0 {
        stats.return_arm /= stats.episodes as f64;
        stats.return_base /= stats.episodes as f64;
    }
    Ok(stats)
}
