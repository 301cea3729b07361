//! Dual-agent clipped-surrogate training with timestep-level expert
//! switching, goal relabeling and periodic evaluation.

mod agent;
mod buffer;
mod collect;
mod config;
mod gae;
mod guidance;
mod toy;
mod train;

pub use agent::{clipped_surrogate, Agent, PpoSettings, UpdateStats};
pub use buffer::{AgentBuffer, AgentId, EpisodeData};
pub use collect::{collect_epoch, her_relabel, rollout, ArmPath, CollectError, CollectSpec, CollectStats, Rollout};
pub use config::TrainConfig;
pub use gae::compute_gae;
pub use guidance::{
    tesg_select, Guidance, GuidanceFactory, GuidanceRegistry, GuidanceSchedule, LinearBlend, NoGuidance, Source, Tesg,
};
pub use toy::{toy_success, train_toy, ToyConfig, ToyEpoch, ToyReport};
pub use train::{
    initial_agents, metrics_header, train, EpochLog, TrainError, TrainOutcome, TrainSetup, MAX_NONFINITE_EPOCHS,
};
