//! Evaluation metrics, the controller registry, batch runners and the
//! robustness campaign harness.

mod campaign;
mod controllers;
mod metrics;
mod runner;

pub use campaign::{
    parse_grid, plot_export, read_seeds, run_scenario, write_seeds, write_summary, CampaignError, CampaignResult,
    CampaignSpec, MeanStd, SeedResult,
};
pub use controllers::{
    BoxedController, ControllerContext, ControllerError, ControllerFactory, ControllerRegistry, LearnedController, PolicyPair,
};
pub use metrics::{aggregate, episode_metrics, EpisodeMetrics, MetricsError, Summary, WINDOW};
pub use runner::{evaluate, maintenance_replay, metrics_of, run_one, ActiveFault, EpisodeOutcome, EvalSpec};
