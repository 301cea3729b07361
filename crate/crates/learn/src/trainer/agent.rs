use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::buffer::{AgentBuffer, AgentId};
use super::gae::compute_gae;
use crate::nn::{gather_rows, Adam, GaussianPolicy, Mlp};

/// Clipped-surrogate and value settings for one update phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoSettings {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub update_steps: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    /// Iterations skipped because a loss was not finite.
    pub skipped: usize,
}

impl UpdateStats {
    pub fn finite(&self) -> bool {
        self.skipped == 0 && self.actor_loss.is_finite() && self.critic_loss.is_finite()
    }
}

/// Actor, critic and their optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: AgentId,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    actor_opt: Adam,
    log_std_opt: Adam,
    critic_opt: Adam,
}

/// Per-sample objective `min(ρA, clip(ρ, 1±ε)A)` and its derivative in `ρ`.
pub fn clipped_surrogate(ratio: f64, adv: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

impl Agent {
    pub fn new(id: AgentId, policy: GaussianPolicy, critic: Mlp, lr_actor: f64, lr_critic: f64) -> Self {
        Self {
            id,
            actor_opt: Adam::new(lr_actor, policy.net.params.len()),
            log_std_opt: Adam::new(lr_actor, policy.log_std.len()),
            critic_opt: Adam::new(lr_critic, critic.params.len()),
            policy,
            critic,
        }
    }

    pub fn values(&self, obs: ArrayView2<'_, f64>) -> Vec<f64> {
        self.critic.predict(obs).expect("critic input width").column(0).to_vec()
    }

    /// Advantages (normalized over the buffer) and returns for every stored
    /// transition, in buffer order.
    pub fn advantages(&self, buffer: &AgentBuffer, s: &PpoSettings) -> (Vec<f64>, Vec<f64>) {
        let mut adv = Vec::with_capacity(buffer.len());
        let mut ret = Vec::with_capacity(buffer.len());
        for ep in buffer.read_for(self.id) {
            let n = ep.len();
            let mut obs = Array2::zeros((n + 1, buffer.obs_dim));
            obs.as_slice_mut().unwrap()[..n * buffer.obs_dim].copy_from_slice(&ep.obs);
            obs.row_mut(n).as_slice_mut().unwrap().copy_from_slice(&ep.final_obs);
            let mut v = self.values(obs.view());
            if ep.terminal {
                v[n] = 0.0;
            }
            let (a, r) = compute_gae(&ep.rewards, &v, s.gamma, s.lambda);
            adv.extend(a);
            ret.extend(r);
        }
        let n = adv.len().max(1) as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        for a in &mut adv {
            *a = (*a - mean) / (std + 1e-8);
        }
        (adv, ret)
    }

    /// K iterations of minibatch clipped-surrogate ascent and value regression.
    pub fn ppo_update<R: Rng + ?Sized>(&mut self, buffer: &AgentBuffer, s: &PpoSettings, rng: &mut R) -> UpdateStats {
        let (adv, ret) = self.advantages(buffer, s);
        let episodes = buffer.read_for(self.id);
        let obs: Vec<f64> = episodes.iter().flat_map(|e| e.obs.iter().copied()).collect();
        let u: Vec<f64> = episodes.iter().flat_map(|e| e.u.iter().copied()).collect();
        let logp_old: Vec<f64> = episodes.iter().flat_map(|e| e.logp.iter().copied()).collect();
        let total = adv.len();
        let n = s.minibatch.min(total);
        let mut stats = UpdateStats::default();
        if n == 0 {
            return stats;
        }
        let mut used = 0usize;
        for _ in 0..s.update_steps {
            let idx = rand::seq::index::sample(rng, total, n).into_vec();
            let o = gather_rows(&obs, buffer.obs_dim, &idx);
            let a = gather_rows(&u, buffer.act_dim, &idx);

            let tape = self.policy.log_prob_batch(o.view(), a.view()).expect("policy input width");
            let mut dlogp = vec![0.0; n];
            let (mut obj, mut ratio_sum, mut clipped) = (0.0, 0.0, 0usize);
            for (j, &i) in idx.iter().enumerate() {
                let ratio = (tape.logp[j] - logp_old[i]).exp();
                let (f, dratio) = clipped_surrogate(ratio, adv[i], s.clip);
                obj += f;
                ratio_sum += ratio;
                if (ratio - 1.0).abs() > s.clip {
                    clipped += 1;
                }
                dlogp[j] = -dratio * ratio / n as f64;
            }
            let actor_loss = -obj / n as f64 - s.entropy_coef * self.policy.entropy();

            let (v, critic_tape) = self.critic.forward(o.view()).expect("critic input width");
            let mut g_v = Array2::zeros((n, 1));
            let mut critic_loss = 0.0;
            for (j, &i) in idx.iter().enumerate() {
                let e = v[[j, 0]] - ret[i];
                critic_loss += e * e;
                g_v[[j, 0]] = 2.0 * s.value_coef * e / n as f64;
            }
            critic_loss *= s.value_coef / n as f64;

            if !(actor_loss.is_finite() && critic_loss.is_finite()) {
                stats.skipped += 1;
                continue;
            }
            let g = self.policy.backward(&tape, &dlogp, -s.entropy_coef);
            self.actor_opt.step(&mut self.policy.net.params, &g.net);
            self.log_std_opt.step(&mut self.policy.log_std, &g.log_std);
            let gc = self.critic.backward(&critic_tape, g_v.view());
            self.critic_opt.step(&mut self.critic.params, &gc);

            used += 1;
            stats.actor_loss += actor_loss;
            stats.critic_loss += critic_loss;
            stats.mean_ratio += ratio_sum / n as f64;
            stats.clip_fraction += clipped as f64 / n as f64;
        }
        if used > 0 {
            let k = used as f64;
            stats.actor_loss /= k;
            stats.critic_loss /= k;
            stats.mean_ratio /= k;
            stats.clip_fraction /= k;
        } else {
            stats.actor_loss = f64::NAN;
            stats.critic_loss = f64::NAN;
        }
        stats.entropy = self.policy.entropy();
        stats
    }
}
