//! A 1-DoF velocity-integrator reach task that exercises the buffer, GAE
//! and clipped-surrogate update end to end in seconds.

use rand::Rng;
use spacearm_core::rng::{self, substream, SimRng};

use super::agent::{Agent, PpoSettings, UpdateStats};
use super::buffer::{AgentBuffer, AgentId, EpisodeData};
use super::guidance::Source;
use crate::nn::{GaussianPolicy, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub max_epochs: u64,
    pub episodes_per_epoch: usize,
    pub horizon: usize,
    pub dt: f64,
    /// Success radius around the goal at the final step.
    pub tolerance: f64,
    pub hidden: Vec<usize>,
    pub ppo: PpoSettings,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub eval_episodes: usize,
    pub target_success: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            episodes_per_epoch: 64,
            horizon: 30,
            dt: 0.1,
            tolerance: 0.05,
            hidden: vec![32, 32],
            ppo: PpoSettings {
                gamma: 0.96,
                lambda: 0.95,
                clip: 0.1,
                update_steps: 30,
                minibatch: 256,
                value_coef: 0.5,
                entropy_coef: 0.0,
            },
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            eval_episodes: 200,
            target_success: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEpoch {
    pub epoch: u64,
    pub success: f64,
    pub mean_return: f64,
    pub update: UpdateStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyReport {
    pub epochs: Vec<ToyEpoch>,
    /// First epoch whose deterministic evaluation met the target.
    pub solved_at: Option<u64>,
}

const OBS_DIM: usize = 3;

fn observe(x: f64, goal: f64) -> [f64; OBS_DIM] {
    [x, goal, goal - x]
}

fn start(rng: &mut SimRng) -> (f64, f64) {
    (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn episode(cfg: &ToyConfig, policy: &GaussianPolicy, rng: &mut SimRng) -> EpisodeData {
    let (mut x, goal) = start(rng);
    let mut ep = EpisodeData {
        obs: Vec::new(),
        u: Vec::new(),
        logp: Vec::new(),
        rewards: Vec::new(),
        sources: Vec::new(),
        final_obs: Vec::new(),
        terminal: false,
    };
    for _ in 0..cfg.horizon {
        let o = observe(x, goal);
        let s = policy.sample(&o, false, rng).expect("toy observation width");
        x += s.action[0] * cfg.dt;
        ep.obs.extend(o);
        ep.u.extend(&s.u);
        ep.logp.push(s.log_prob);
        ep.rewards.push(-(goal - x).abs());
        ep.sources.push(Source::Policy);
    }
    ep.final_obs = observe(x, goal).to_vec();
    ep
}

/// Fraction of episodes ending within tolerance under the mean action.
pub fn toy_success(cfg: &ToyConfig, policy: &GaussianPolicy, rng: &mut SimRng) -> f64 {
    let hits = (0..cfg.eval_episodes)
        .filter(|_| {
            let (mut x, goal) = start(rng);
            for _ in 0..cfg.horizon {
                x += policy.to_action(policy.mean(&observe(x, goal)).unwrap().as_slice().unwrap())[0] * cfg.dt;
            }
            (goal - x).abs() < cfg.tolerance
        })
        .count();
    hits as f64 / cfg.eval_episodes.max(1) as f64
}

/// Trains until the target success rate or `max_epochs`.
pub fn train_toy(cfg: &ToyConfig) -> ToyReport {
    let mut init = substream(cfg.seed, &[rng::TRAIN, rng::INIT]);
    let mut widths = vec![OBS_DIM];
    widths.extend(&cfg.hidden);
    let mut critic_widths = widths.clone();
    widths.push(1);
    critic_widths.push(1);
    let policy = GaussianPolicy::new(&widths, vec![1.0], &mut init);
    let critic = Mlp::orthogonal(&critic_widths, 1.0, &mut init);
    let mut agent = Agent::new(AgentId::Arm, policy, critic, cfg.lr_actor, cfg.lr_critic);
    let mut buffer = AgentBuffer::new(AgentId::Arm, OBS_DIM, 1);
    let mut report = ToyReport {
        epochs: Vec::new(),
        solved_at: None,
    };
    for epoch in 1..=cfg.max_epochs {
        let mut collect_rng = substream(cfg.seed, &[rng::TRAIN, epoch, rng::POLICY]);
        let mut total = 0.0;
        for _ in 0..cfg.episodes_per_epoch {
            let ep = episode(cfg, &agent.policy, &mut collect_rng);
            total += ep.rewards.iter().sum::<f64>();
            buffer.push(ep);
        }
        let update = agent.ppo_update(&buffer, &cfg.ppo, &mut substream(cfg.seed, &[rng::TRAIN, epoch, rng::UPDATE]));
        buffer.flush();
        let success = toy_success(cfg, &agent.policy, &mut substream(cfg.seed, &[rng::EVAL]));
        report.epochs.push(ToyEpoch {
            epoch,
            success,
            mean_return: total / cfg.episodes_per_epoch as f64,
            update,
        });
        if success >= cfg.target_success {
            report.solved_at = Some(epoch);
            break;
        }
    }
    report
}
