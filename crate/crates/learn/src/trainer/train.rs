use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use spacearm_core::dynamics::SystemModel;
use spacearm_core::env::{EnvConfig, SuccessThresholds, ARM_OBS_DIM, BASE_OBS_DIM};
use spacearm_core::rng::{self, substream};

use super::agent::{Agent, PpoSettings, UpdateStats};
use super::buffer::{AgentBuffer, AgentId};
use super::collect::{collect_epoch, CollectError, CollectSpec, CollectStats};
use super::config::TrainConfig;
use super::guidance::{GuidanceRegistry, GuidanceSchedule};
use crate::eval::{aggregate, evaluate, metrics_of, ControllerContext, ControllerRegistry, EvalSpec, PolicyPair, Summary};
use crate::nn::{AgentCheckpoint, CheckpointError, GaussianPolicy, Mlp};

/// Consecutive epochs with non-finite losses tolerated before aborting.
pub const MAX_NONFINITE_EPOCHS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown guidance strategy {0:?}")]
    UnknownGuidance(String),
    #[error(transparent)]
    Collect(#[from] CollectError),
    #[error("losses were non-finite for {epochs} consecutive epochs (last: epoch {epoch}, arm {arm:?}, base {base:?})")]
    NonFinite {
        epoch: u64,
        epochs: u32,
        arm: UpdateStats,
        base: UpdateStats,
    },
    #[error("training output: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Eval(#[from] crate::eval::ControllerError),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub struct TrainSetup<'a> {
    pub model: &'a SystemModel,
    pub env: &'a EnvConfig,
    pub cfg: &'a TrainConfig,
    /// Success criterion for relabeling and evaluation.
    pub thresholds: SuccessThresholds,
    pub guidance: &'a GuidanceRegistry,
    /// Run directory for metrics and checkpoints; nothing is written if `None`.
    pub out_dir: Option<&'a Path>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: u64,
    pub k: u64,
    pub p: f64,
    pub collect: CollectStats,
    pub eval: Option<Summary>,
    pub arm: UpdateStats,
    pub base: UpdateStats,
    pub arm_reads: usize,
    pub base_reads: usize,
}

pub struct TrainOutcome {
    pub arm: Agent,
    pub base: Agent,
    pub log: Vec<EpochLog>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainOutcome {
    pub fn policies(&self) -> PolicyPair {
        PolicyPair {
            arm: self.arm.policy.clone(),
            base: self.base.policy.clone(),
        }
    }
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// Freshly initialized agents, fixed by the seed. Arm actions are joint
/// rates bounded by the joint velocity limits, base actions torques bounded
/// by the base torque limit.
pub fn initial_agents(model: &SystemModel, cfg: &TrainConfig, seed: u64) -> (Agent, Agent) {
    let init = |i: u64| substream(seed, &[rng::TRAIN, rng::INIT, i]);
    let arm_bound: Vec<f64> = model.velocity_limits().iter().copied().collect();
    let base_bound = vec![model.base_torque_limit; 3];
    let arm = Agent::new(
        AgentId::Arm,
        GaussianPolicy::new(&widths(ARM_OBS_DIM, &cfg.arm_hidden, arm_bound.len()), arm_bound, &mut init(0)),
        Mlp::orthogonal(&widths(ARM_OBS_DIM, &cfg.arm_hidden, 1), 1.0, &mut init(1)),
        cfg.lr_actor,
        cfg.lr_critic,
    );
    let base = Agent::new(
        AgentId::Base,
        GaussianPolicy::new(&widths(BASE_OBS_DIM, &cfg.base_hidden, 3), base_bound, &mut init(2)),
        Mlp::orthogonal(&widths(BASE_OBS_DIM, &cfg.base_hidden, 1), 1.0, &mut init(3)),
        cfg.lr_actor,
        cfg.lr_critic,
    );
    (arm, base)
}

pub fn metrics_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "epoch",
        "k",
        "p",
        "episodes",
        "dropped",
        "relabeled",
        "prior_fraction",
        "rollout_success",
        "return_arm",
        "return_base",
        "asr",
        "ape",
        "aoe",
        "abae",
    ]
    .map(String::from)
    .to_vec();
    for agent in ["arm", "base"] {
        for f in ["actor_loss", "critic_loss", "mean_ratio", "clip_fraction", "entropy"] {
            h.push(format!("{agent}_{f}"));
        }
    }
    h
}

impl EpochLog {
    pub fn row(&self) -> Vec<String> {
        let c = &self.collect;
        let mut r = vec![
            self.epoch.to_string(),
            self.k.to_string(),
            self.p.to_string(),
            c.episodes.to_string(),
            c.dropped.to_string(),
            c.relabeled.to_string(),
            (c.prior_steps as f64 / c.steps.max(1) as f64).to_string(),
            (c.successes as f64 / c.episodes.max(1) as f64).to_string(),
            c.return_arm.to_string(),
            c.return_base.to_string(),
        ];
        match &self.eval {
            Some(s) => r.extend([s.asr, s.ape, s.aoe, s.abae].map(|x| x.to_string())),
            None => r.extend(std::iter::repeat_n(String::new(), 4)),
        }
        for u in [&self.arm, &self.base] {
            r.extend([u.actor_loss, u.critic_loss, u.mean_ratio, u.clip_fraction, u.entropy].map(|x| x.to_string()));
        }
        r
    }
}

fn checkpoint(agent: &Agent, cfg: &TrainConfig, seed: u64, epoch: u64) -> AgentCheckpoint {
    let hyper = BTreeMap::from([
        ("epoch".to_string(), epoch as f64),
        ("seed".to_string(), seed as f64),
        ("gamma".to_string(), cfg.gamma),
        ("lambda".to_string(), cfg.lambda),
        ("clip".to_string(), cfg.clip),
        ("lr_actor".to_string(), cfg.lr_actor),
        ("lr_critic".to_string(), cfg.lr_critic),
    ]);
    AgentCheckpoint {
        agent: agent.id.name().into(),
        actor: agent.policy.clone(),
        critic: agent.critic.clone(),
        hyper,
    }
}

fn save_pair(dir: &Path, arm: &Agent, base: &Agent, cfg: &TrainConfig, seed: u64, epoch: u64) -> Result<Vec<PathBuf>, TrainError> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for a in [arm, base] {
        let p = dir.join(format!("{}.ckpt", a.id.name()));
        checkpoint(a, cfg, seed, epoch).save(&p)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Collect, update each agent, flush, repeat. Deterministic for a given
/// seed; the worker count only changes speed.
pub fn train(setup: &TrainSetup<'_>) -> Result<TrainOutcome, TrainError> {
    setup.cfg.validate().map_err(TrainError::Config)?;
    setup.env.validate().map_err(TrainError::Config)?;
    match setup.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| TrainError::Pool(e.to_string()))?
            .install(|| train_inner(setup)),
        None => train_inner(setup),
    }
}

fn train_inner(setup: &TrainSetup<'_>) -> Result<TrainOutcome, TrainError> {
    let cfg = setup.cfg;
    let schedule = GuidanceSchedule::new(cfg.guidance_epochs);
    let guidance = setup
        .guidance
        .build(&cfg.guidance, schedule)
        .ok_or_else(|| TrainError::UnknownGuidance(cfg.guidance.clone()))?;
    let horizon = setup.env.horizon;
    let epochs = cfg.epochs(horizon);
    let per_epoch = cfg.episodes_per_epoch(horizon);
    log::info!(
        "training {epochs} epochs of {per_epoch} episodes, guidance {} for k <= {}",
        guidance.name(),
        cfg.guidance_epochs
    );

    let (mut arm, mut base) = initial_agents(setup.model, cfg, setup.seed);
    let mut arm_buf = AgentBuffer::new(AgentId::Arm, ARM_OBS_DIM, arm.policy.act_dim());
    let mut base_buf = AgentBuffer::new(AgentId::Base, BASE_OBS_DIM, base.policy.act_dim());
    let ppo = PpoSettings {
        gamma: cfg.gamma,
        lambda: cfg.lambda,
        clip: cfg.clip,
        update_steps: cfg.update_steps,
        minibatch: cfg.minibatch,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
    };

    let mut metrics = match setup.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut w = csv::Writer::from_path(dir.join("metrics.csv")).map_err(std::io::Error::from)?;
            w.write_record(metrics_header()).map_err(std::io::Error::from)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let controllers = ControllerRegistry::builtin();
    let mut log = Vec::with_capacity(epochs as usize);
    let mut checkpoints = Vec::new();
    let mut nonfinite = 0u32;

    for epoch in 1..=epochs {
        let k = epoch - 1;
        let snapshot = PolicyPair {
            arm: arm.policy.clone(),
            base: base.policy.clone(),
        };
        let spec = CollectSpec {
            model: setup.model,
            env: setup.env,
            thresholds: setup.thresholds,
            guidance: guidance.as_ref(),
            k,
            epoch,
            relabel: epoch <= cfg.her_epochs,
            episodes: per_epoch,
            seed: setup.seed,
        };
        let collect = collect_epoch(&spec, &snapshot, &mut arm_buf, &mut base_buf)?;

        let reads = (arm_buf.reads(), base_buf.reads());
        let mut arm_rng = substream(setup.seed, &[rng::TRAIN, epoch, rng::UPDATE, 0]);
        let mut base_rng = substream(setup.seed, &[rng::TRAIN, epoch, rng::UPDATE, 1]);
        let (arm_stats, base_stats) = rayon::join(
            || arm.ppo_update(&arm_buf, &ppo, &mut arm_rng),
            || base.ppo_update(&base_buf, &ppo, &mut base_rng),
        );
        let (arm_reads, base_reads) = (arm_buf.reads() - reads.0, base_buf.reads() - reads.1);
        arm_buf.flush();
        base_buf.flush();

        if arm_stats.finite() && base_stats.finite() {
            nonfinite = 0;
        } else {
            nonfinite += 1;
            log::warn!("epoch {epoch}: non-finite losses ({nonfinite} in a row)");
            if nonfinite > MAX_NONFINITE_EPOCHS {
                return Err(TrainError::NonFinite {
                    epoch,
                    epochs: nonfinite,
                    arm: arm_stats,
                    base: base_stats,
                });
            }
        }

        let eval = if epoch % cfg.eval_every == 0 || epoch == epochs {
            let ctx = ControllerContext {
                policies: Some(Arc::new(PolicyPair {
                    arm: arm.policy.clone(),
                    base: base.policy.clone(),
                })),
            };
            let spec = EvalSpec {
                model: setup.model,
                env: setup.env,
                thresholds: setup.thresholds,
                episodes: cfg.eval_episodes,
                seed: setup.seed,
                stream: rng::EVAL,
            };
            Some(aggregate(&metrics_of(&evaluate(&spec, "learned", &controllers, &ctx, None)?)))
        } else {
            None
        };

        let entry = EpochLog {
            epoch,
            k,
            p: schedule.p(k),
            collect,
            eval,
            arm: arm_stats,
            base: base_stats,
            arm_reads,
            base_reads,
        };
        log::info!(
            "epoch {epoch}/{epochs} k={k} prior={:.3} rollout_success={:.3} return_arm={:.3} return_base={:.3}{}",
            collect.prior_steps as f64 / collect.steps.max(1) as f64,
            collect.successes as f64 / collect.episodes.max(1) as f64,
            collect.return_arm,
            collect.return_base,
            eval.map(|s| format!(" eval asr={:.3} ape={:.4} aoe={:.4} abae={:.4}", s.asr, s.ape, s.aoe, s.abae))
                .unwrap_or_default()
        );
        if let Some(w) = metrics.as_mut() {
            w.write_record(entry.row()).map_err(std::io::Error::from)?;
            w.flush()?;
        }
        log.push(entry);

        if let Some(dir) = setup.out_dir {
            if epoch % cfg.checkpoint_every == 0 || epoch == epochs {
                let sub = dir.join("checkpoints").join(format!("epoch_{epoch:04}"));
                checkpoints.extend(save_pair(&sub, &arm, &base, cfg, setup.seed, epoch)?);
            }
        }
    }
    if let Some(dir) = setup.out_dir {
        checkpoints.extend(save_pair(dir, &arm, &base, cfg, setup.seed, epochs)?);
    }
    Ok(TrainOutcome {
        arm,
        base,
        log,
        checkpoints,
    })
}
