use serde::{Deserialize, Serialize};
use spacearm_core::env::{success_monitor, SuccessThresholds, TaskErrors};

/// Steps averaged at the end of an episode.
pub const WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("trace has {got} steps, expected {expected}")]
    IncompleteTrace { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub e_pos: f64,
    pub e_ori: f64,
    pub e_att: f64,
}

pub fn episode_metrics(
    trace: &[TaskErrors],
    horizon: usize,
    thresholds: &SuccessThresholds,
) -> Result<EpisodeMetrics, MetricsError> {
    if trace.len() != horizon || horizon < WINDOW {
        return Err(MetricsError::IncompleteTrace {
            expected: horizon,
            got: trace.len(),
        });
    }
    let w = &trace[horizon - WINDOW..];
    let mean = |f: fn(&TaskErrors) -> f64| w.iter().map(f).sum::<f64>() / WINDOW as f64;
    Ok(EpisodeMetrics {
        success: success_monitor(trace, thresholds),
        e_pos: mean(|e| e.e_pos),
        e_ori: mean(|e| e.e_ori),
        e_att: mean(|e| e.e_att),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Episodes attempted, including any that aborted.
    pub episodes: usize,
    pub asr: f64,
    pub ape: f64,
    pub aoe: f64,
    pub abae: f64,
}

/// Aborted episodes (`None`) count as failures and are left out of the
/// error means.
pub fn aggregate(episodes: &[Option<EpisodeMetrics>]) -> Summary {
    let done: Vec<&EpisodeMetrics> = episodes.iter().flatten().collect();
    let n = done.len().max(1) as f64;
    Summary {
        episodes: episodes.len(),
        asr: done.iter().filter(|m| m.success).count() as f64 / episodes.len().max(1) as f64,
        ape: done.iter().map(|m| m.e_pos).sum::<f64>() / n,
        aoe: done.iter().map(|m| m.e_ori).sum::<f64>() / n,
        abae: done.iter().map(|m| m.e_att).sum::<f64>() / n,
    }
}
