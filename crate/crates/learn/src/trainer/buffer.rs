use std::sync::atomic::{AtomicUsize, Ordering};

use super::guidance::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentId {
    Arm,
    Base,
}

impl AgentId {
    pub fn name(self) -> &'static str {
        match self {
            AgentId::Arm => "arm",
            AgentId::Base => "base",
        }
    }
}

/// One agent's view of one episode, stored intact. Row-major flat arrays:
/// `obs` is `len × obs_dim`, `u` is `len × act_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeData {
    pub obs: Vec<f64>,
    /// Executed action, normalized by the policy bound, unclipped.
    pub u: Vec<f64>,
    /// Log-density of `u` under the collecting policy.
    pub logp: Vec<f64>,
    pub rewards: Vec<f64>,
    pub sources: Vec<Source>,
    /// Observation after the last step, for the bootstrap value.
    pub final_obs: Vec<f64>,
    /// Ended by termination rather than truncation at the horizon.
    pub terminal: bool,
}

impl EpisodeData {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Transitions collected for one agent during one epoch.
#[derive(Debug)]
pub struct AgentBuffer {
    pub agent: AgentId,
    pub obs_dim: usize,
    pub act_dim: usize,
    episodes: Vec<EpisodeData>,
    reads: AtomicUsize,
}

impl AgentBuffer {
    pub fn new(agent: AgentId, obs_dim: usize, act_dim: usize) -> Self {
        Self {
            agent,
            obs_dim,
            act_dim,
            episodes: Vec::new(),
            reads: AtomicUsize::new(0),
        }
    }

    pub fn push(&mut self, ep: EpisodeData) {
        debug_assert_eq!(ep.obs.len(), ep.len() * self.obs_dim);
        debug_assert_eq!(ep.u.len(), ep.len() * self.act_dim);
        debug_assert!(ep.logp.iter().all(|l| l.is_finite()));
        self.episodes.push(ep);
    }

    pub fn len(&self) -> usize {
        self.episodes.iter().map(EpisodeData::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[EpisodeData] {
        &self.episodes
    }

    /// Read access for an update phase; counted so tests can check that
    /// each agent only ever consumes its own buffer.
    pub fn read_for(&self, agent: AgentId) -> &[EpisodeData] {
        assert_eq!(agent, self.agent, "{} update read the {} buffer", agent.name(), self.agent.name());
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.episodes
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn flush(&mut self) {
        self.episodes.clear();
    }

    pub fn source_count(&self, source: Source) -> usize {
        self.episodes.iter().flat_map(|e| &e.sources).filter(|&&s| s == source).count()
    }
}
